"""
Utility commands - Doctor
"""

import importlib
import sys

import typer

from qzk_lab.cli.shared import CATALOG_PATH, CONFIG_PATH, console
from qzk_lab.core import ConfigError, ExperimentCatalog

app = typer.Typer()


@app.command()
def doctor() -> None:
    """Validate the qzk-lab installation"""
    console.print("[bold cyan]Running diagnostics...[/bold cyan]\n")

    issues = []

    # Check Python version
    py_version = f"{sys.version_info.major}.{sys.version_info.minor}"
    console.print(f"[green]✓[/green] Python {py_version}")

    # Numeric stack
    for module in ("numpy", "scipy", "galois"):
        try:
            mod = importlib.import_module(module)
            console.print(f"[green]✓[/green] {module} {getattr(mod, '__version__', '?')}")
        except ImportError:
            console.print(f"[red]✗[/red] {module} not importable")
            issues.append(f"Install {module}")

    # Catalog and its schema
    if CATALOG_PATH.exists():
        try:
            catalog = ExperimentCatalog(CATALOG_PATH)
            console.print(f"[green]✓[/green] Catalog: {len(catalog.names())} experiments")
        except ConfigError as e:
            console.print(f"[red]✗[/red] Catalog invalid: {e}")
            issues.append(f"Fix {CATALOG_PATH}")
    else:
        console.print(f"[yellow]![/yellow] No catalog at {CATALOG_PATH} (run from the repo root)")
        issues.append("Run bench/all-acceptance from the repository root or pass --catalog")

    # Log directory
    if CONFIG_PATH.exists():
        console.print(f"[green]✓[/green] Config dir: {CONFIG_PATH}")
    else:
        console.print(f"[yellow]![/yellow] Config dir {CONFIG_PATH} not created yet")

    # Summary
    console.print()
    if issues:
        console.print("[yellow]Issues found:[/yellow]")
        for issue in issues:
            console.print(f"  - {issue}")
    else:
        console.print("[green bold]✓ All checks passed![/green bold]")
