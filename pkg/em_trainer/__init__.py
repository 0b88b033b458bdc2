"""
Penalized EM training: configuration, state, objective, drivers and extraction.
"""

from .config import TrainConfig
from .extraction import HISTORY_COLUMNS, edge_strength, extract_graph, write_acceptance, write_history
from .objective import (
    QGradient,
    expected_sample,
    mechanism_grad,
    objective_report,
    penalized_objective,
    penalty,
    penalty_grad_logits,
    q_objective,
    q_objective_rows,
    q_objective_with_grad,
)
from .optimizer import AdamOptimizer
from .state import (
    FitState,
    initialize_state,
    load_state,
    save_state,
    state_from_document,
    state_sections,
    train_config_from_document,
)
from .trainer import EMTrainer, enforce_acyclic, m_step, run_em, run_em_dag

__all__ = [
    "TrainConfig",
    "AdamOptimizer",
    "FitState",
    "initialize_state",
    "save_state",
    "load_state",
    "state_sections",
    "state_from_document",
    "train_config_from_document",
    "QGradient",
    "expected_sample",
    "q_objective",
    "q_objective_rows",
    "q_objective_with_grad",
    "mechanism_grad",
    "penalty",
    "penalty_grad_logits",
    "objective_report",
    "penalized_objective",
    "EMTrainer",
    "m_step",
    "run_em",
    "run_em_dag",
    "enforce_acyclic",
    "edge_strength",
    "extract_graph",
    "write_history",
    "write_acceptance",
    "HISTORY_COLUMNS",
]
