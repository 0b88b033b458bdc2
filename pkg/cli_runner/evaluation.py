"""
Recovery metrics of a trained model against a ground truth.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

from em_trainer import FitState, TrainConfig, extract_graph
from graph_model import EdgePattern, edge_precision_recall, shd
from missing_mechanism import log_prob_r_rows
from sem_engine import hard_mask
from shared.constants import ERROR_MESSAGES
from shared.exceptions import DimensionMismatchError
from synthetic_bench import Dataset
from target_likelihood import log_density_rows

logger = logging.getLogger(__name__)

HELDOUT_SEED = 0


def _check_k(name: str, left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatchError(ERROR_MESSAGES["dimension_mismatch"].format(left=f"{name} K={left}", right=f"K={right}"))


def graph_metrics(target: EdgePattern, m_edges: EdgePattern, truth_target: EdgePattern, truth_m: EdgePattern) -> Dict[str, Any]:
    """
    SHD of both graphs plus directed-edge precision and recall of the target graph.

    Raises:
        DimensionMismatchError: estimate and truth disagree on K
    """
    _check_k("estimate", target.k, truth_target.k)
    _check_k("m-graph", m_edges.k, truth_m.k)
    pr = edge_precision_recall(target, truth_target)
    m_pr = edge_precision_recall(m_edges, truth_m)
    return {
        "k": target.k,
        "shd_target": shd(target, truth_target),
        "shd_m": shd(m_edges, truth_m, count_reversal_twice=True),
        "precision": pr["precision"],
        "recall": pr["recall"],
        "m_precision": m_pr["precision"],
        "m_recall": m_pr["recall"],
        "edges_estimated": target.num_edges,
        "edges_true": truth_target.num_edges,
    }


def heldout_loglik(state: FitState, test: Dataset, cfg: Optional[TrainConfig] = None) -> Optional[float]:
    """
    Mean of log p(x) + log p(r | x) over the complete records of a test split.

    Uses the hard mask of the trained edge distribution. Returns None when the
    split has no complete record.
    """
    _check_k("test data", test.k, state.k)
    rows = test.complete_rows
    if not rows.any():
        logger.warning("Test split has no complete records; skipping held-out log-likelihood")
        return None
    complete = test.subset(rows)
    logdet_mode = cfg.logdet_mode if cfg is not None else "auto"
    logdet_cfg = cfg.logdet if cfg is not None else None
    rng = np.random.default_rng(HELDOUT_SEED)
    values = log_density_rows(
        state.model, hard_mask(state.mask), state.noise, complete.y, complete.interventions(), logdet_mode, logdet_cfg, rng
    )
    values = values + log_prob_r_rows(state.mnar, complete.r, complete.y, skip=complete.s == 0)
    return float(np.mean(values))


def evaluate_state(
    state: FitState,
    truth_target: EdgePattern,
    truth_m: EdgePattern,
    threshold: float,
    test: Optional[Dataset] = None,
    cfg: Optional[TrainConfig] = None,
) -> Dict[str, Any]:
    """Extract graphs from a trained state and score them."""
    target, m_edges = extract_graph(state, threshold)
    metrics = graph_metrics(target, m_edges, truth_target, truth_m)
    if test is not None:
        metrics["heldout_loglik"] = heldout_loglik(state, test, cfg)
    return metrics
