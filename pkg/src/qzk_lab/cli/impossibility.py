"""
Impossibility commands - Subspace states, cloning and the contrived verifier
"""

from pathlib import Path

import typer

from qzk_lab.cli.shared import IMPOSSIBILITY_KINDS, run_single

app = typer.Typer()


@app.command("run-impossibility")
def run_impossibility(
    experiment: str = typer.Argument(
        "impossibility-structure", help=f"One of: {', '.join(IMPOSSIBILITY_KINDS)}"
    ),
    n: int = typer.Option(6, "--n", help="Ambient dimension, even and <= 10"),
    lam: int = typer.Option(8, "--lam", "--lambda", help="Security parameter (2..16)"),
    t: int = 8,
    policy: str = typer.Option("straight_line", help="Simulator policy driving the verifier"),
    probe: int = typer.Option(2, "--probe", "--rounds", help="Channel the probe policies target (1..4)"),
    strategy: str = typer.Option(
        "measure_and_resend", help="Extra cloning strategy, e.g. oracle_grover_budget(2)"
    ),
    ciphertext: str = typer.Option("zero", help="zero or real"),
    trials: int = typer.Option(200, "--trials", "--runs", help="Number of runs"),
    seed: int = 0,
    transport: str = typer.Option("inproc", help="inproc or tcp"),
    workers: int = 1,
    out: Path | None = typer.Option(None, "--out", "-o", help="Write the JSON report"),
    csv: Path | None = typer.Option(None, "--csv", help="Write histograms as CSV"),
) -> None:
    """Run subspace, cloning and straight-line simulation experiments"""
    run_single(
        experiment,
        IMPOSSIBILITY_KINDS,
        out,
        csv,
        n=n,
        lam=lam,
        t=t,
        policy=policy,
        probe=probe,
        strategy=strategy,
        ciphertext=ciphertext,
        trials=trials,
        seed=seed,
        transport=transport,
        workers=workers,
    )
