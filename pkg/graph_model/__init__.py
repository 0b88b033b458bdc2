"""
Graph representations, random graph generation, acyclicity and recovery metrics.
"""

from .acyclicity import (
    acyclicity_penalty,
    acyclicity_penalty_grad,
    is_acyclic,
    is_contractive_spectral,
    prune_to_acyclic,
    spectral_norm,
    transitive_closure,
)
from .metrics import edge_precision_recall, shd
from .patterns import EdgePattern, ErConfig, generate_er

__all__ = [
    "EdgePattern",
    "ErConfig",
    "generate_er",
    "shd",
    "edge_precision_recall",
    "acyclicity_penalty",
    "acyclicity_penalty_grad",
    "is_acyclic",
    "is_contractive_spectral",
    "prune_to_acyclic",
    "spectral_norm",
    "transitive_closure",
]
