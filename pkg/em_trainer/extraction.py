"""
Graph extraction from a trained state, and the history table.
"""

import logging
from typing import Tuple

import numpy as np

from graph_model import EdgePattern
from missing_mechanism import extract_m_edges
from sem_engine import LinearSem, hard_mask
from shared.output_utils import save_table

from .state import FitState

logger = logging.getLogger(__name__)

SENSITIVITY_PROBES = 256
SENSITIVITY_SEED = 0

HISTORY_COLUMNS = [
    "epoch",
    "objective",
    "objective_se",
    "q_value",
    "proxy_loglik",
    "imputed_records",
    "mean_attempts",
    "fallback_count",
    "lipschitz_bound",
    "temperature",
    "max_change",
    "aborted",
]
ACCEPTANCE_COLUMNS = ["epoch", "imputed_records", "mean_attempts", "fallback_count"]


def edge_strength(state: FitState) -> np.ndarray:
    """
    K x K edge strengths: |b_jk| for the linear model, otherwise the mean
    |dF_k/dx_j| over standard-normal probes under the hard mask.
    """
    model = state.model
    if isinstance(model, LinearSem):
        return np.abs(model.b)
    k = model.k
    m = hard_mask(state.mask)
    probes = np.random.default_rng(SENSITIVITY_SEED).standard_normal((SENSITIVITY_PROBES, k))
    strength = np.zeros((k, k))
    for j in range(k):
        direction = np.zeros((SENSITIVITY_PROBES, k))
        direction[:, j] = 1.0
        # row j of the strength matrix: sensitivity of every output to x_j
        strength[j] = np.abs(model.jvp(probes, m, direction)).mean(axis=0)
    np.fill_diagonal(strength, 0.0)
    return strength


def extract_graph(state: FitState, threshold: float) -> Tuple[EdgePattern, EdgePattern]:
    """
    Target edge j -> k iff sigmoid(gamma_jk) > 0.5 and strength > threshold.

    Returns:
        (target pattern, X -> R pattern)
    """
    included = hard_mask(state.mask) > 0.5
    target = EdgePattern((included & (edge_strength(state) > threshold)).astype(np.int8))
    return target, extract_m_edges(state.mnar, threshold)


def write_history(state: FitState, path: str) -> str:
    save_table(state.history, path, HISTORY_COLUMNS)
    logger.info(f"Wrote {len(state.history)} history rows to {path}")
    return path


def write_acceptance(state: FitState, path: str) -> str:
    rows = [{column: record[column] for column in ACCEPTANCE_COLUMNS} for record in state.history]
    return save_table(rows, path, ACCEPTANCE_COLUMNS)
