"""Experiment orchestration: configuration, Monte Carlo runners, CLI and serialization."""
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .coverage import CoverageReport, run_bandit, run_coverage, run_coverage_grid, run_supermartingale
from .tightness import run_tightness

__all__ = [
    "ConfigError",
    "CoverageReport",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "run_bandit",
    "run_coverage",
    "run_coverage_grid",
    "run_supermartingale",
    "run_tightness",
]
