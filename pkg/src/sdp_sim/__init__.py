"""Hierarchical differentially private gradient aggregation simulator."""

from .core import ConfigError, Dataset, ModelParams, SeededRng, TrainingConfig
from .harness import ExperimentResult, run_ablation_grid, run_experiment

__all__ = [
    "ConfigError",
    "Dataset",
    "ExperimentResult",
    "ModelParams",
    "SeededRng",
    "TrainingConfig",
    "run_ablation_grid",
    "run_experiment",
]
