from .config import ExperimentCatalog, make_config
from .errors import ConfigError, QzkError
from .models import ExperimentConfig, Metric, Report
from .utils import save_histograms_csv, save_reports, setup_crash_logging, trial_rng

__all__ = [
    "ExperimentCatalog",
    "ExperimentConfig",
    "Metric",
    "Report",
    "QzkError",
    "ConfigError",
    "make_config",
    "save_reports",
    "save_histograms_csv",
    "setup_crash_logging",
    "trial_rng",
]
