"""
Simulator commands - Rewinding bounds, running time and views
"""

from pathlib import Path

import typer

from qzk_lab.cli.shared import SIM_KINDS, run_single

app = typer.Typer()


@app.command("run-sim")
def run_sim(
    experiment: str = typer.Argument("sim-iterations", help=f"One of: {', '.join(SIM_KINDS)}"),
    m: int = typer.Option(1, "--m", "--M", "-m", help="Verifier register width (exact mode: <= 5)"),
    lam: int = typer.Option(8, "--lam", "--lambda", help="Security parameter (2..16)"),
    t: int = 8,
    verifier: str = typer.Option("zoo", help="'zoo' or one verifier name"),
    hybrid: str = typer.Option("trapdoor", help="Simulated views: trapdoor, witness or witness-zero"),
    trials: int = typer.Option(200, "--trials", "--runs", help="Number of runs"),
    seed: int = 0,
    budget: int = typer.Option(10**6, help="Lookahead iteration valve"),
    workers: int = 1,
    out: Path | None = typer.Option(None, "--out", "-o", help="Write the JSON report"),
    csv: Path | None = typer.Option(None, "--csv", help="Write histograms as CSV"),
) -> None:
    """Run the black-box simulator against verifier families"""
    run_single(
        experiment,
        SIM_KINDS,
        out,
        csv,
        m=m,
        lam=lam,
        t=t,
        verifier=verifier,
        hybrid=hybrid,
        trials=trials,
        seed=seed,
        budget=budget,
        workers=workers,
    )
