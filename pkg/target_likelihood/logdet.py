"""
log |det(I - D J_F(x))| for the residual map x -> x - D F(x).

Linear models use an exact LU-based value. Any contractive model can use the
unbiased power-series estimator

    log det(I - A) = -sum_m Tr(A^m) / m,    A = D J_F(x),

truncated at a random N = n_min + Poisson(rate) with each term reweighted by
1 / P(N >= m), and traces replaced by Hutchinson probes w^T A^m w. Powers of A
are applied through Jacobian-vector products only.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import poisson

from sem_engine import GradientBundle, InterventionMask, LinearSem, SemModel
from shared.config import require_choice
from shared.constants import ERROR_MESSAGES, EXACT_LOGDET_MAX_NODES, LOGDET_MODES
from shared.exceptions import ConfigError, SingularJacobianError

from .config import LogDetEstimatorConfig

logger = logging.getLogger(__name__)


def resolve_logdet_mode(mode: str, model: SemModel) -> str:
    """Map 'auto' to a concrete mode and refuse exact mode for non-linear models."""
    require_choice("logdet_mode", mode, LOGDET_MODES)
    is_linear = isinstance(model, LinearSem)
    if mode == "auto":
        return "exact" if is_linear and model.k <= EXACT_LOGDET_MAX_NODES else "stochastic"
    if mode == "exact" and not is_linear:
        raise ConfigError(ERROR_MESSAGES["exact_logdet_requires"], field="logdet_mode")
    return mode


def _residual_jacobian(c: np.ndarray, d: np.ndarray) -> np.ndarray:
    # I - D C^T
    return np.eye(c.shape[0]) - d[:, None] * c.T


def logdet_exact_linear(b: np.ndarray, mask: np.ndarray, iv: InterventionMask) -> float:
    """log|det(I - D (M * B)^T)| for one intervention pattern.

    Raises:
        SingularJacobianError: when the residual map is not invertible
    """
    c = np.asarray(mask, dtype=float) * np.asarray(b, dtype=float)
    sign, value = np.linalg.slogdet(_residual_jacobian(c, iv.d.astype(float)))
    if sign == 0 or not np.isfinite(value):
        raise SingularJacobianError("I - D (M * B)^T is singular")
    return float(value)


def logdet_exact_linear_grad(b: np.ndarray, mask: np.ndarray, iv: InterventionMask) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value plus gradients w.r.t. ``b`` and ``mask``.

    d/dC log|det(I - D C^T)| = -(I - D C^T)^{-1} D, so dB = M * that and dM = B * that.
    """
    b = np.asarray(b, dtype=float)
    mask = np.asarray(mask, dtype=float)
    d = iv.d.astype(float)
    a = _residual_jacobian(mask * b, d)
    value = logdet_exact_linear(b, mask, iv)
    grad_c = -np.linalg.solve(a, np.diag(d))
    grad_b = mask * grad_c
    np.fill_diagonal(grad_b, 0.0)
    return value, grad_b, b * grad_c


def logdet_exact_rows(model: LinearSem, mask: np.ndarray, d: np.ndarray, with_grad: bool = False):
    """Exact values for every row of an (n, K) observed-indicator matrix.

    Rows are grouped by intervention pattern so each distinct pattern is factorized once.

    Returns:
        values (n,) and, with ``with_grad``, a GradientBundle for the row sum
    """
    patterns, inverse = np.unique(np.asarray(d, dtype=bool), axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    counts = np.bincount(inverse, minlength=len(patterns))
    values = np.empty(len(patterns))
    bundle = GradientBundle()
    for i, pattern in enumerate(patterns):
        iv = InterventionMask(pattern, np.zeros(pattern.shape))
        if with_grad:
            values[i], grad_b, grad_m = logdet_exact_linear_grad(model.b, mask, iv)
            bundle.add({"b": counts[i] * grad_b}, counts[i] * grad_m)
        else:
            values[i] = logdet_exact_linear(model.b, mask, iv)
    return (values[inverse], bundle) if with_grad else values[inverse]


@dataclass(frozen=True)
class RouletteDraw:
    """One realization of the random truncation and probes for a batch of rows.

    Attributes:
        n_terms: (n,) truncation points N_i
        probes: (n, P, K) standard-normal Hutchinson probes
    """

    n_terms: np.ndarray
    probes: np.ndarray

    @property
    def max_terms(self) -> int:
        return int(self.n_terms.max()) if self.n_terms.size else 0


def survival(m: np.ndarray, cfg: LogDetEstimatorConfig) -> np.ndarray:
    """P(N >= m) for N = n_min + Poisson(rate)."""
    m = np.asarray(m)
    return np.where(m <= cfg.n_min, 1.0, poisson.sf(m - cfg.n_min - 1, cfg.poisson_rate))


def draw_roulette(cfg: LogDetEstimatorConfig, n: int, k: int, rng: np.random.Generator) -> RouletteDraw:
    n_terms = cfg.n_min + rng.poisson(cfg.poisson_rate, size=n)
    probes = rng.standard_normal((n, cfg.num_hutchinson, k))
    return RouletteDraw(n_terms=n_terms, probes=probes)


def _series_weights(draw: RouletteDraw, cfg: LogDetEstimatorConfig) -> np.ndarray:
    """(n, N_max) weights 1 / (m P(N >= m)) for m <= N_i, zero beyond."""
    m = np.arange(1, draw.max_terms + 1)
    weights = 1.0 / (m * survival(m, cfg))
    return np.where(m[None, :] <= draw.n_terms[:, None], weights[None, :], 0.0)


def _expand(x: np.ndarray, d: np.ndarray, probes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.repeat(x, probes, axis=0), np.repeat(d, probes, axis=0)


def logdet_stochastic_rows(
    model: SemModel,
    mask: np.ndarray,
    x: np.ndarray,
    d: np.ndarray,
    cfg: LogDetEstimatorConfig,
    draw: RouletteDraw,
    with_grad: bool = False,
):
    """Estimator values for every row; with ``with_grad`` also the pathwise gradient of their sum.

    The gradient differentiates the same realization (same N, same probes).
    """
    n, k = x.shape
    p = draw.probes.shape[1]
    xs, ds = _expand(x, np.asarray(d, dtype=float), p)
    w = draw.probes.reshape(n * p, k)
    coeff = np.repeat(_series_weights(draw, cfg), p, axis=0)
    n_max = coeff.shape[1]

    # v_j = (D J)^j w
    powers = [w]
    traces = np.zeros(n * p)
    for j in range(1, n_max + 1):
        powers.append(ds * model.jvp(xs, mask, powers[-1]))
        traces += coeff[:, j - 1] * np.sum(w * powers[-1], axis=1)
    values = -traces.reshape(n, p).mean(axis=1)
    if not with_grad:
        return values

    # a_i = (J^T D)^i w
    adjoints = [w]
    for _ in range(1, n_max):
        adjoints.append(model.vjp_input(xs, mask, ds * adjoints[-1]))
    bundle = GradientBundle()
    for j in range(n_max):
        u = np.zeros_like(w)
        for i in range(n_max - j):
            u += coeff[:, i + j][:, None] * adjoints[i]
        if not np.any(u):
            continue
        bundle.add(*model.bilinear_grad(xs, mask, -(ds * u) / p, powers[j]))
    return values, bundle


def logdet_stochastic(
    model: SemModel,
    mask: np.ndarray,
    x: np.ndarray,
    iv: InterventionMask,
    cfg: LogDetEstimatorConfig,
    rng: np.random.Generator,
    draw: Optional[RouletteDraw] = None,
) -> float:
    """One unbiased estimate for a single record."""
    x = np.asarray(x, dtype=float)[None, :]
    draw = draw if draw is not None else draw_roulette(cfg, 1, model.k, rng)
    return float(logdet_stochastic_rows(model, mask, x, iv.d[None, :], cfg, draw)[0])


def estimator_diagnostics(
    model: SemModel,
    mask: np.ndarray,
    x: np.ndarray,
    iv: InterventionMask,
    cfg: LogDetEstimatorConfig,
    repeats: int,
    rng: np.random.Generator,
) -> dict:
    """Repeated estimates at one point: mean, standard error, mean term count, exact value if linear."""
    if repeats < 2:
        raise ValueError(f"repeats must be >= 2 (got {repeats})")
    x = np.asarray(x, dtype=float)
    xs = np.repeat(x[None, :], repeats, axis=0)
    ds = np.repeat(iv.d[None, :], repeats, axis=0)
    draw = draw_roulette(cfg, repeats, model.k, rng)
    estimates = logdet_stochastic_rows(model, mask, xs, ds, cfg, draw)
    report = {
        "repeats": repeats,
        "mean": float(estimates.mean()),
        "se": float(estimates.std(ddof=1) / np.sqrt(repeats)),
        "mean_terms": float(draw.n_terms.mean()),
        "exact": None,
    }
    if isinstance(model, LinearSem):
        report["exact"] = logdet_exact_linear(model.b, mask, iv)
    return report
