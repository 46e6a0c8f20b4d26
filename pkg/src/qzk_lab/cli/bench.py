"""
Catalog commands - Benchmarks and the full acceptance run
"""

from pathlib import Path

from rich.table import Table
import typer

from qzk_lab.cli.shared import CATALOG_PATH, console, metrics_table, write_outputs
from qzk_lab.core import ExperimentCatalog, QzkError, Report
from qzk_lab.core.harness import run_experiment

app = typer.Typer()


def _run_catalog(
    catalog: Path,
    names: list[str] | None,
    out: Path | None,
    csv: Path | None,
    show_metrics: bool,
    **overrides: int | None,
) -> list[Report]:
    try:
        cat = ExperimentCatalog(catalog)
        configs = [cat.get(name, **overrides) for name in (names or cat.names())]
    except QzkError as e:
        console.print(f"[red]{e}[/red]")
        raise typer.Exit(1) from e

    reports: list[Report] = []
    for cfg in configs:
        try:
            with console.status(f"[cyan]Running {cfg.name}...[/cyan]"):
                report = run_experiment(cfg)
        except QzkError as e:
            console.print(f"[red]{cfg.name}: {e}[/red]")
            raise typer.Exit(1) from e
        reports.append(report)
        if show_metrics:
            console.print(metrics_table(report))

    summary = Table(title="Summary", header_style="bold magenta")
    summary.add_column("Experiment", style="cyan")
    summary.add_column("Kind", style="dim")
    summary.add_column("Metrics", justify="right")
    summary.add_column("Wall clock", justify="right")
    summary.add_column("Result")
    for r in reports:
        summary.add_row(
            r.config.name,
            r.config.experiment,
            str(len(r.metrics)),
            f"{r.wall_clock:.2f}s",
            "[green]pass[/green]" if r.passed else "[red]FAIL[/red]",
        )
    console.print(summary)
    write_outputs(reports, out, csv)
    return reports


@app.command()
def bench(
    names: list[str] | None = typer.Argument(None, help="Catalog entries (default: all)"),
    catalog: Path = typer.Option(CATALOG_PATH, help="Experiment catalog JSON"),
    trials: int | None = typer.Option(None, help="Override the trial count"),
    seed: int | None = typer.Option(None, help="Override the seed"),
    workers: int | None = typer.Option(None, help="Threads running trials"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Write the JSON reports"),
    csv: Path | None = typer.Option(None, "--csv", help="Write histograms as CSV"),
) -> None:
    """Run catalog experiments and report metrics with timings"""
    reports = _run_catalog(
        catalog, names, out, csv, True, trials=trials, seed=seed, workers=workers
    )
    if not all(r.passed for r in reports):
        raise typer.Exit(1)


@app.command("all-acceptance")
def all_acceptance(
    catalog: Path = typer.Option(CATALOG_PATH, help="Experiment catalog JSON"),
    workers: int | None = typer.Option(None, help="Threads running trials"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Write the JSON reports"),
    csv: Path | None = typer.Option(None, "--csv", help="Write histograms as CSV"),
) -> None:
    """Run every catalog experiment at full size; exit 0 iff all metrics pass"""
    reports = _run_catalog(catalog, None, out, csv, False, workers=workers)
    failed = [m.name for r in reports for m in r.metrics if not m.passed]

    console.print()
    if failed:
        console.print(f"[red bold]✗ {len(failed)} metric(s) failed[/red bold]")
        raise typer.Exit(1)
    console.print("[green bold]✓ All acceptance checks passed![/green bold]")
