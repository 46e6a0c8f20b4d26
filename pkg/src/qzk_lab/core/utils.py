from collections.abc import Mapping
import csv
from datetime import datetime
from pathlib import Path
import sys
import tempfile
import traceback
from types import TracebackType

import numpy as np
from rich.console import Console

from qzk_lab.core.models import Report

try:
    from qzk_lab.__version__ import __version__
except ImportError:
    __version__ = "unknown"

LOG_DIR = Path.home() / ".config" / "qzk-lab" / "logs"


def setup_crash_logging(log_dir: Path = LOG_DIR) -> Path:
    """Configure crash logging for bug reports"""
    log_dir.mkdir(parents=True, exist_ok=True)

    def excepthook(
        exc_type: type[BaseException], exc_value: BaseException, exc_traceback: TracebackType | None
    ) -> None:
        log_file = log_dir / f"crash-{datetime.now():%Y%m%d-%H%M%S}.log"

        with open(log_file, "w") as f:
            f.write(f"qzk-lab v{__version__}\n")
            f.write(f"Python {sys.version}\n")
            f.write(f"Platform: {sys.platform}\n\n")
            traceback.print_exception(exc_type, exc_value, exc_traceback, file=f)

        console = Console()
        console.print("\n[red bold]qzk-lab crashed![/red bold]")
        console.print(f"[yellow]Crash log saved to:[/yellow] {log_file}")
        console.print("[dim]Please include this file when reporting the issue.\n")

    sys.excepthook = excepthook
    return log_dir


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, trial index)."""
    return np.random.default_rng([seed, trial])


def write_atomic(text: str, path: Path) -> None:
    """Write via a temp file in the same directory and an atomic rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        mode="w", delete=False, dir=path.parent, prefix=f".{path.name}-", suffix=".tmp"
    ) as f:
        f.write(text)
        temp_path = Path(f.name)
    try:
        temp_path.replace(path)
    except OSError:
        temp_path.unlink(missing_ok=True)
        raise


def save_reports(reports: list[Report], path: Path) -> None:
    if len(reports) == 1:
        write_atomic(reports[0].model_dump_json(indent=2), path)
        return
    body = ",\n".join(r.model_dump_json(indent=2) for r in reports)
    write_atomic(f"[\n{body}\n]\n", path)


def save_histograms_csv(histograms: Mapping[str, Mapping[str, int]], path: Path) -> None:
    """Long-format CSV: histogram, key, count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["histogram", "key", "count"])
        for name, counts in histograms.items():
            for key, count in counts.items():
                writer.writerow([name, key, count])
