"""
Target-law log-density under hard interventions:

    log p(x) = sum_{k intervened} log phi(x_k)
             + sum_{k observed} log N(x_k - F_k(x); 0, sigma_k^2)
             + log |det(I - D J_F(x))|
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from sem_engine import GradientBundle, InterventionMask, SemModel, backprop, forward_f

from .config import LogDetEstimatorConfig
from .logdet import (
    RouletteDraw,
    draw_roulette,
    logdet_exact_rows,
    logdet_stochastic_rows,
    resolve_logdet_mode,
)
from .noise import NoiseModel


@dataclass
class DensityGradient:
    """Gradient of a row-summed log-density."""

    model: GradientBundle
    log_variances: np.ndarray


def _rows(x, iv: InterventionMask):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x, iv.batch(x.shape[0]).d


def log_density_rows(
    model: SemModel,
    mask: np.ndarray,
    noise: NoiseModel,
    x: np.ndarray,
    iv: InterventionMask,
    logdet_mode: str = "auto",
    cfg: Optional[LogDetEstimatorConfig] = None,
    rng: Optional[np.random.Generator] = None,
    draw: Optional[RouletteDraw] = None,
) -> np.ndarray:
    """Per-row log-density for an (n, K) batch (or a single K-vector)."""
    return _evaluate(model, mask, noise, x, iv, logdet_mode, cfg, rng, draw, with_grad=False)


def log_density_with_grad(
    model: SemModel,
    mask: np.ndarray,
    noise: NoiseModel,
    x: np.ndarray,
    iv: InterventionMask,
    logdet_mode: str = "auto",
    cfg: Optional[LogDetEstimatorConfig] = None,
    rng: Optional[np.random.Generator] = None,
    draw: Optional[RouletteDraw] = None,
):
    """Per-row log-density plus the gradient of its row sum.

    Returns:
        (values, DensityGradient)
    """
    return _evaluate(model, mask, noise, x, iv, logdet_mode, cfg, rng, draw, with_grad=True)


def _evaluate(model, mask, noise, x, iv, logdet_mode, cfg, rng, draw, with_grad):
    x, d = _rows(x, iv)
    mask = np.asarray(mask, dtype=float)
    mode = resolve_logdet_mode(logdet_mode, model)

    eps = x - forward_f(model, mask, x)
    values = np.sum(np.where(d, 0.0, norm.logpdf(x)), axis=1) + noise.log_density(eps, d)

    if mode == "exact":
        logdet = logdet_exact_rows(model, mask, d, with_grad=with_grad)
    else:
        cfg = cfg if cfg is not None else LogDetEstimatorConfig()
        if draw is None:
            rng = rng if rng is not None else np.random.default_rng(cfg.seed)
            draw = draw_roulette(cfg, x.shape[0], model.k, rng)
        logdet = logdet_stochastic_rows(model, mask, x, d, cfg, draw, with_grad=with_grad)

    if not with_grad:
        return values + logdet
    logdet_values, bundle = logdet
    # d/dF of the Gaussian term is eps / sigma^2 on observed coordinates
    adjoint = np.where(d, eps / noise.variances, 0.0)
    backprop(model, mask, x, adjoint, bundle=bundle)
    grad_log_var = np.sum(np.where(d, -0.5 + 0.5 * eps**2 / noise.variances, 0.0), axis=0)
    return values + logdet_values, DensityGradient(model=bundle, log_variances=grad_log_var)


def target_log_density(
    model: SemModel,
    mask: np.ndarray,
    noise: NoiseModel,
    x: np.ndarray,
    iv: InterventionMask,
    logdet_mode: str = "auto",
    cfg: Optional[LogDetEstimatorConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """log p(x) for one record; intervened coordinates use a standard-normal density.

    Raises:
        SingularJacobianError: exact mode at a non-invertible residual map
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("target_log_density expects a single K-vector; use log_density_rows for batches")
    return float(log_density_rows(model, mask, noise, x, iv, logdet_mode, cfg, rng)[0])
