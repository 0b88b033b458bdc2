"""
Comparison methods for the benchmark: the complete-data control and two
deletion / single-imputation baselines. All of them train with the same
TrainConfig as the EM method.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from em_trainer import FitState, TrainConfig, run_em_dag
from shared.exceptions import DataError
from synthetic_bench import Dataset

logger = logging.getLogger(__name__)


def complete_case_dataset(data: Dataset) -> Dataset:
    """
    Keep only records with every coordinate observed.

    Raises:
        DataError: no record is complete
    """
    rows = data.complete_rows
    if not rows.any():
        raise DataError("complete-case deletion left no records")
    logger.info(f"Complete-case deletion kept {int(rows.sum())}/{data.n} records")
    return data.subset(rows)


def mean_impute_dataset(data: Dataset) -> Dataset:
    """Fill missing values with the column mean of the observed values (0 for an all-missing column)."""
    y = data.y.copy()
    observed = data.r == 1
    for j in range(data.k):
        column = y[observed[:, j], j]
        fill = float(column.mean()) if column.size else 0.0
        y[~observed[:, j], j] = fill
    return Dataset(y, data.r, data.s, data.ignorable, pre_imputed=True, provenance=data.provenance)


def method_dataset(method: str, data: Dataset, complete_values: Optional[np.ndarray] = None) -> Tuple[Dataset, Optional[float]]:
    """
    Training data for a benchmark method.

    Args:
        method: em, complete_data, complete_case or mean_impute
        data: The coarsened dataset
        complete_values: Values before coarsening (required for complete_data)

    Returns:
        (dataset, recorded rate); the rate is None when the caller keeps the sweep rate
    """
    if method == "em":
        return data, None
    if method == "complete_data":
        if complete_values is None:
            raise ValueError("complete_data needs the values before coarsening")
        return data.complete_data_view(complete_values), 0.0
    if method == "complete_case":
        return complete_case_dataset(data), None
    if method == "mean_impute":
        return mean_impute_dataset(data), None
    raise ValueError(f"unknown method '{method}'")


def fit_method(method: str, data: Dataset, cfg: TrainConfig, complete_values: Optional[np.ndarray] = None) -> Tuple[FitState, Optional[float]]:
    """Train one method; returns (state, recorded rate override)."""
    train_data, rate = method_dataset(method, data, complete_values)
    return run_em_dag(train_data, cfg, progress=False), rate
