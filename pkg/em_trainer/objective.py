"""
The Monte-Carlo Q objective and the penalties of the M-step.

    Q = mean_i [ log p(x_i | theta) + log p(r_i | x_i, phi) ]

over completed rows x_i. Without an explicit mask draw the objective is
evaluated at the expected mask sigmoid(gamma), which makes it a
deterministic function of every parameter.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from estep_imputation import ImputedBatch
from graph_model import acyclicity_penalty, acyclicity_penalty_grad
from missing_mechanism import log_prob_r_grad, log_prob_r_rows
from sem_engine import GumbelMask, MaskSample, expected_mask, gradients, mask_from_noise
from target_likelihood import log_density_rows, log_density_with_grad

from .config import TrainConfig
from .state import LOG_VARIANCES, MASK_LOGITS, MNAR_W, MNAR_Z, MODEL_PREFIX, FitState


@dataclass
class QGradient:
    """Gradients of the (mean) objective, split into theta and phi tensors."""

    theta: Dict[str, np.ndarray]
    phi: Dict[str, np.ndarray]


def expected_sample(mask: GumbelMask) -> MaskSample:
    """The noiseless soft draw at temperature 1: values sigmoid(gamma)."""
    return mask_from_noise(GumbelMask(mask.logits, temperature=1.0, hard=False), np.zeros_like(mask.logits))


def _skip(batch: ImputedBatch) -> np.ndarray:
    # intervened indicators are structurally 1
    return ~np.asarray(batch.s).astype(bool)


def q_objective_rows(
    imputed: ImputedBatch,
    state: FitState,
    cfg: TrainConfig,
    sample: Optional[MaskSample] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Per-row target log-density plus mechanism log-likelihood."""
    sample = sample if sample is not None else expected_sample(state.mask)
    target = log_density_rows(
        state.model, sample.values, state.noise, imputed.x, imputed.interventions, cfg.logdet_mode, cfg.logdet, rng=rng
    )
    return target + log_prob_r_rows(state.mnar, imputed.r, imputed.x, skip=_skip(imputed))


def q_objective(
    imputed: ImputedBatch,
    state: FitState,
    cfg: TrainConfig,
    sample: Optional[MaskSample] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Monte-Carlo estimate of the expected complete-data log-likelihood.

    Args:
        imputed: Rows completed under the current snapshot
        state: Parameters to evaluate
        cfg: Training settings (log-det mode and estimator)
        sample: Mask draw; None evaluates at the expected mask
        rng: Stream for the stochastic log-det estimator

    Returns:
        Mean over rows of log p(x | theta) + log p(r | x, phi)
    """
    return float(np.mean(q_objective_rows(imputed, state, cfg, sample, rng)))


def q_objective_with_grad(
    imputed: ImputedBatch,
    state: FitState,
    cfg: TrainConfig,
    sample: Optional[MaskSample] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, QGradient]:
    """Objective plus its gradient w.r.t. theta (through the mask draw) and phi."""
    n = len(imputed)
    sample = sample if sample is not None else expected_sample(state.mask)
    target, density_grad = log_density_with_grad(
        state.model, sample.values, state.noise, imputed.x, imputed.interventions, cfg.logdet_mode, cfg.logdet, rng=rng
    )
    mech, grad_w, grad_z = log_prob_r_grad(state.mnar, imputed.r, imputed.x, skip=_skip(imputed))

    params, grad_logits = gradients(state.model, sample, imputed.x, bundle=density_grad.model.scale(1.0 / n))
    theta = {MODEL_PREFIX + name: value for name, value in params.items()}
    theta[MASK_LOGITS] = grad_logits
    if state.noise.learnable:
        theta[LOG_VARIANCES] = density_grad.log_variances / n
    phi = {MNAR_W: grad_w / n, MNAR_Z: grad_z / n}
    return float(np.mean(target + mech)), QGradient(theta=theta, phi=phi)


def penalty(state: FitState, cfg: TrainConfig) -> float:
    """lambda1 E|M|_1 + lambda2 sum_k |w_k|_1 + lambda_dag h(E[M])."""
    expected = expected_mask(state.mask)
    value = cfg.lambda1 * expected.sum() + cfg.lambda2 * np.abs(state.mnar.w).sum()
    if cfg.lambda_dag > 0.0:
        value += cfg.lambda_dag * acyclicity_penalty(expected)
    return float(value)


def penalty_grad_logits(state: FitState, cfg: TrainConfig) -> np.ndarray:
    """Gradient of the mask penalties w.r.t. the logits."""
    s = expit(state.mask.logits)
    slope = s * (1.0 - s)
    grad = cfg.lambda1 * slope
    if cfg.lambda_dag > 0.0:
        grad = grad + cfg.lambda_dag * acyclicity_penalty_grad(expected_mask(state.mask)) * slope
    np.fill_diagonal(grad, 0.0)
    return grad


def penalty_subgrad_w(state: FitState, cfg: TrainConfig) -> np.ndarray:
    """lambda2 sign(w) with sign(0) = 0."""
    return cfg.lambda2 * np.sign(state.mnar.w)


def objective_report(
    imputed: ImputedBatch,
    state: FitState,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Per-epoch objective summary at the expected mask.

    ``proxy_loglik`` averages over the fully observed rows only, where
    log p(x) + log p(r = 1 | x) is the exact observed-data log-likelihood;
    it is NaN when no row is fully observed.
    """
    rows = q_objective_rows(imputed, state, cfg, rng=rng)
    q = float(rows.mean())
    complete = np.all(imputed.r == 1, axis=1)
    return {
        "objective": q - penalty(state, cfg),
        "objective_se": float(rows.std(ddof=1) / np.sqrt(rows.size)) if rows.size > 1 else 0.0,
        "q_value": q,
        "proxy_loglik": float(rows[complete].mean()) if complete.any() else float("nan"),
    }


def penalized_objective(
    imputed: ImputedBatch,
    state: FitState,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float, float]:
    """
    Penalized objective at the expected mask.

    Returns:
        (penalized value, its standard error over rows, unpenalized value)
    """
    report = objective_report(imputed, state, cfg, rng)
    return report["objective"], report["objective_se"], report["q_value"]


def mechanism_grad(imputed: ImputedBatch, state: FitState) -> Dict[str, np.ndarray]:
    """Gradient of the mean mechanism log-likelihood w.r.t. phi alone."""
    n = len(imputed)
    _, grad_w, grad_z = log_prob_r_grad(state.mnar, imputed.r, imputed.x, skip=_skip(imputed))
    return {MNAR_W: grad_w / n, MNAR_Z: grad_z / n}
