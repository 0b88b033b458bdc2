"""
Command-line surface: experiment configuration, commands, baselines and the benchmark sweep.
"""

from .baselines import complete_case_dataset, fit_method, mean_impute_dataset, method_dataset
from .benchmark import SweepCell, load_checkpoint, run_cell, run_sweep, save_checkpoint, sweep_cells, sweep_columns
from .commands import (
    BenchmarkCommand,
    EvaluateCommand,
    FitCommand,
    SimulateCommand,
    cmd_benchmark,
    cmd_evaluate,
    cmd_fit,
    cmd_simulate,
)
from .config import ExperimentConfig, SweepConfig, experiment_from_dict, load_experiment
from .evaluation import evaluate_state, graph_metrics, heldout_loglik

__all__ = [
    "ExperimentConfig",
    "SweepConfig",
    "experiment_from_dict",
    "load_experiment",
    "SimulateCommand",
    "FitCommand",
    "EvaluateCommand",
    "BenchmarkCommand",
    "cmd_simulate",
    "cmd_fit",
    "cmd_evaluate",
    "cmd_benchmark",
    "complete_case_dataset",
    "mean_impute_dataset",
    "method_dataset",
    "fit_method",
    "graph_metrics",
    "heldout_loglik",
    "evaluate_state",
    "SweepCell",
    "sweep_cells",
    "sweep_columns",
    "run_cell",
    "run_sweep",
    "save_checkpoint",
    "load_checkpoint",
]
