"""
Target-law density under interventions with exact and stochastic log-determinants.
"""

from .config import LogDetEstimatorConfig
from .density import DensityGradient, log_density_rows, log_density_with_grad, target_log_density
from .logdet import (
    RouletteDraw,
    draw_roulette,
    estimator_diagnostics,
    logdet_exact_linear,
    logdet_exact_linear_grad,
    logdet_exact_rows,
    logdet_stochastic,
    logdet_stochastic_rows,
    resolve_logdet_mode,
    survival,
)
from .noise import NoiseModel

__all__ = [
    "LogDetEstimatorConfig",
    "NoiseModel",
    "RouletteDraw",
    "draw_roulette",
    "survival",
    "resolve_logdet_mode",
    "logdet_exact_linear",
    "logdet_exact_linear_grad",
    "logdet_exact_rows",
    "logdet_stochastic",
    "logdet_stochastic_rows",
    "estimator_diagnostics",
    "target_log_density",
    "log_density_rows",
    "log_density_with_grad",
    "DensityGradient",
]
