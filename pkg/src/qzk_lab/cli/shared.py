"""
Shared utilities and constants for CLI commands.
"""

from importlib.metadata import PackageNotFoundError, metadata
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.table import Table
import typer

from qzk_lab.core import Metric, QzkError, Report, make_config, save_histograms_csv, save_reports
from qzk_lab.core.harness import run_experiment

# Shared console instance
console = Console()

# Configuration paths
CONFIG_PATH = Path.home() / ".config" / "qzk-lab"
LOG_PATH = CONFIG_PATH / "logs"
CATALOG_PATH = Path("configs") / "experiments.json"

# Experiment kinds grouped by command
PROTOCOL_KINDS = (
    "completeness",
    "challenge-uniformity",
    "replay",
    "soundness-guessing",
    "soundness-mauling",
    "binding",
)
SIM_KINDS = (
    "mixed-state-bound",
    "sim-iterations",
    "termination-tail",
    "space",
    "view-indistinguishability",
    "channel-blocks",
)
IMPOSSIBILITY_KINDS = ("subspace-test", "clone-floor", "impossibility-structure", "extraction")


def get_version_info() -> tuple[str, str]:
    """Get version and author info"""
    try:
        from qzk_lab.__version__ import __author__, __version__

        return __version__, __author__
    except ImportError:
        pass
    try:
        meta = metadata("qzk-lab")
    except PackageNotFoundError:
        return "unknown", "unknown"
    if "Author" in meta:
        author = meta["Author"]
    elif "Author-email" in meta:
        author = meta["Author-email"].split(" <")[0]
    else:
        author = "unknown"
    return meta["Version"], author


def _result(m: Metric) -> str:
    if not m.graded:
        return "[dim]info[/dim]"
    return "[green]pass[/green]" if m.passed else "[red]FAIL[/red]"


def metrics_table(report: Report) -> Table:
    table = Table(
        title=f"{report.config.name} ({report.config.experiment})", header_style="bold magenta"
    )
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_column("Bound", justify="right", style="dim")
    table.add_column("Tolerance", justify="right", style="dim")
    table.add_column("Result")

    for m in report.metrics:
        table.add_row(
            m.name,
            f"{m.value:.6g}",
            "-" if m.bound is None else f"{m.bound:.6g}",
            "-" if m.tolerance is None else f"{m.tolerance:.3g}",
            _result(m),
        )
    return table


def write_outputs(reports: list[Report], out: Path | None, csv: Path | None) -> None:
    if out is not None:
        save_reports(reports, out)
        console.print(f"[green]✓[/green] Report written to {out}")
    if csv is not None:
        merged = {
            f"{r.config.name}/{name}": counts
            for r in reports
            for name, counts in r.histograms.items()
        }
        save_histograms_csv(merged, csv)
        console.print(f"[green]✓[/green] Histograms written to {csv}")


def run_single(
    kind: str, kinds: tuple[str, ...], out: Path | None, csv: Path | None, **fields: Any
) -> None:
    """Build an ad-hoc config, run it, print the table and exit 1 on any failed metric."""
    if kind not in kinds:
        console.print(f"[red]Unknown experiment '{kind}'[/red] (choose from: {', '.join(kinds)})")
        raise typer.Exit(1)

    try:
        cfg = make_config(name=kind, experiment=kind, out=None if out is None else str(out), **fields)
        with console.status(f"[cyan]Running {kind}...[/cyan]"):
            report = run_experiment(cfg)
    except QzkError as e:
        console.print(f"[red]{e}[/red]")
        raise typer.Exit(1) from e

    console.print(metrics_table(report))
    console.print(f"[dim]wall clock {report.wall_clock:.2f}s[/dim]")
    write_outputs([report], out, csv)

    if not report.passed:
        raise typer.Exit(1)
