"""
Synthetic benchmark instances, interventional data simulation and dataset files.
"""

from .config import PILOT_ROWS, RATE_TOLERANCE, InstanceSpec
from .dataset import Dataset, column_names, read_dataset, split_dataset, write_dataset
from .generator import GroundTruth, calibrate_intercepts, gen_instance, simulate, simulate_complete
from .truth import graph_sections, graphs_from_sections, read_truth, truth_mask, write_truth

__all__ = [
    "PILOT_ROWS",
    "RATE_TOLERANCE",
    "InstanceSpec",
    "Dataset",
    "column_names",
    "read_dataset",
    "write_dataset",
    "split_dataset",
    "GroundTruth",
    "calibrate_intercepts",
    "gen_instance",
    "simulate",
    "simulate_complete",
    "write_truth",
    "read_truth",
    "truth_mask",
    "graph_sections",
    "graphs_from_sections",
]
