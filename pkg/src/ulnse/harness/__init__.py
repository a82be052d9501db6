"""Configuration, experiments, reporting and the ``ul-nse-lab`` command line."""

from .config import EXPERIMENTS, ExperimentConfig, config_from_dict, parse_config
from .reporting import compare_runs, emit_report, load_manifest, run_experiment

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "compare_runs",
    "config_from_dict",
    "emit_report",
    "load_manifest",
    "parse_config",
    "run_experiment",
]
