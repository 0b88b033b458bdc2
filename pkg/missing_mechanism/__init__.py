"""
Block-parallel missingness mechanism: probabilities, likelihood, sampling and fitting.
"""

from .fitting import fit_complete_cases, laplace_bounds, marginal_fallback
from .model import (
    MnarModel,
    extract_m_edges,
    log_prob_r,
    log_prob_r_grad,
    log_prob_r_rows,
    prob_missing,
    sample_r,
)

__all__ = [
    "MnarModel",
    "prob_missing",
    "log_prob_r",
    "log_prob_r_rows",
    "log_prob_r_grad",
    "sample_r",
    "extract_m_edges",
    "fit_complete_cases",
    "marginal_fallback",
    "laplace_bounds",
]
