"""
Protocol commands - Sessions of the interactive proof and its attacks
"""

from pathlib import Path

import typer

from qzk_lab.cli.shared import PROTOCOL_KINDS, run_single

app = typer.Typer()


@app.command("run-protocol")
def run_protocol(
    experiment: str = typer.Argument("completeness", help=f"One of: {', '.join(PROTOCOL_KINDS)}"),
    lam: int = typer.Option(8, "--lam", "--lambda", help="Security parameter (2..16)"),
    t: int = 40,
    instance: Path | None = typer.Option(None, "--instance", help="GRA1 graph file (default: planted)"),
    trials: int = typer.Option(200, "--trials", "--sessions", help="Number of sessions"),
    seed: int = 0,
    transport: str = typer.Option("inproc", help="inproc or tcp"),
    workers: int = 1,
    out: Path | None = typer.Option(None, "--out", "-o", help="Write the JSON report"),
    csv: Path | None = typer.Option(None, "--csv", help="Write histograms as CSV"),
) -> None:
    """Run honest or cheating sessions of the protocol"""
    run_single(
        experiment,
        PROTOCOL_KINDS,
        out,
        csv,
        lam=lam,
        t=t,
        instance=None if instance is None else str(instance),
        trials=trials,
        seed=seed,
        transport=transport,
        workers=workers,
    )
