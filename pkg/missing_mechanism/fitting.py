"""
Complete-case initialization of the missingness mechanism.
"""

import logging
from typing import Optional

import numpy as np
import scipy.optimize as sopt
from scipy.special import expit, log_expit, logit

from shared.constants import DEFAULT_LAMBDA
from shared.exceptions import InitializationError

from .model import MnarModel

logger = logging.getLogger(__name__)

WEIGHT_CAP = 10.0
MAX_FIT_ITER = 2000


def laplace_bounds(n: int):
    """Intercept clip range [logit(1 / (n + 2)), logit((n + 1) / (n + 2))]."""
    return float(logit(1.0 / (n + 2))), float(logit((n + 1.0) / (n + 2)))


def _l1_logistic(features: np.ndarray, missing: np.ndarray, lambda2: float, z_bounds, max_iter: int):
    """min mean NLL + lambda2 |w|_1 over (w, z) via doubled non-negative weights."""
    n, p = features.shape

    def _func(v):
        w = v[:p] - v[p : 2 * p]
        z = v[-1]
        a = features @ w + z
        # missing = 1 means R = 0, modeled with probability expit(a)
        nll = -np.mean(missing * log_expit(a) + (1.0 - missing) * log_expit(-a))
        g = (expit(a) - missing) / n
        grad_w = features.T @ g
        obj = nll + lambda2 * v[: 2 * p].sum()
        grad = np.concatenate((grad_w + lambda2, -grad_w + lambda2, [g.sum()]))
        return obj, grad

    start = np.zeros(2 * p + 1)
    start[-1] = np.clip(logit(np.clip(missing.mean(), 1e-6, 1 - 1e-6)), *z_bounds)
    bounds = [(0.0, WEIGHT_CAP)] * (2 * p) + [z_bounds]
    sol = sopt.minimize(_func, start, method="L-BFGS-B", jac=True, bounds=bounds, options={"maxiter": max_iter})
    if not sol.success:
        logger.debug(f"Logistic fit stopped early: {sol.message}")
    return sol.x[:p] - sol.x[p : 2 * p], float(sol.x[-1])


def marginal_fallback(data) -> MnarModel:
    """Zero weights with intercepts from the marginal missing rates of non-intervened cells."""
    r = np.asarray(data.r)
    eligible = np.asarray(data.s).astype(bool)
    k = r.shape[1]
    z = np.empty(k)
    for j in range(k):
        cells = r[eligible[:, j], j]
        n = cells.size
        lo, hi = laplace_bounds(n)
        rate = (np.sum(cells == 0) + 1.0) / (n + 2.0)
        z[j] = np.clip(logit(rate), lo, hi)
    return MnarModel.zeros(k, z)


def fit_complete_cases(
    data,
    max_parents: Optional[int] = None,
    lambda2: float = DEFAULT_LAMBDA,
    max_iter: int = MAX_FIT_ITER,
) -> MnarModel:
    """
    L1-regularized logistic regression of each R_k on X_{-k}.

    The rows used for indicator k are those where every other coordinate is
    observed and node k is not intervened.

    Args:
        data: Dataset-like object with ``y`` (NaN where missing), ``r`` and ``s``
        max_parents: Keep only the largest-magnitude weights per indicator
        lambda2: L1 weight on the mean negative log-likelihood
        max_iter: Iteration cap of the optimizer

    Returns:
        Fitted MnarModel with zero diagonal and |w| <= 10

    Raises:
        InitializationError: when no indicator has a single usable row
    """
    y = np.asarray(data.y, dtype=float)
    r = np.asarray(data.r).astype(bool)
    s = np.asarray(data.s).astype(bool)
    n, k = y.shape
    w = np.zeros((k, k))
    z = np.zeros(k)
    fallback = None
    usable = 0
    for j in range(k):
        others = np.delete(np.arange(k), j)
        rows = s[:, j] & r[:, others].all(axis=1)
        n_rows = int(rows.sum())
        if n_rows == 0:
            fallback = fallback if fallback is not None else marginal_fallback(data)
            z[j] = fallback.z[j]
            logger.debug(f"Indicator {j}: no complete cases, using marginal rate")
            continue
        usable += 1
        lo, hi = laplace_bounds(n)
        missing = (~r[rows, j]).astype(float)
        if missing.sum() == 0:
            z[j] = lo
            continue
        if missing.sum() == n_rows:
            z[j] = hi
            continue
        weights, z[j] = _l1_logistic(y[np.ix_(rows, others)], missing, lambda2, (lo, hi), max_iter)
        if max_parents is not None and np.count_nonzero(weights) > max_parents:
            cutoff = np.argsort(-np.abs(weights))[max_parents:]
            weights[cutoff] = 0.0
        w[others, j] = np.clip(weights, -WEIGHT_CAP, WEIGHT_CAP)
    if usable == 0:
        raise InitializationError("no complete cases available for any missingness indicator")
    logger.info(f"Fitted missingness mechanism on complete cases ({usable}/{k} indicators)")
    return MnarModel(w, z)
