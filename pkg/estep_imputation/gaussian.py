"""
Exact Gaussian posteriors for linear SEMs with ignorable missingness.

Under X = D (B^T X + eps) + (I - D) C with C ~ N(0, I) the joint precision is

    Lambda_{X,I} = (I - B D) (D Lambda^{-1} D + (I - D))^{-1} (I - D B^T),

and the missing block given the observed block is Gaussian with precision
[Lambda_{X,I}]_{miss,miss}.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from sem_engine import InterventionMask
from shared.exceptions import PosteriorError
from target_likelihood import NoiseModel

from .batch import ImputedBatch

logger = logging.getLogger(__name__)


def interventional_precision(b: np.ndarray, noise: NoiseModel, iv: InterventionMask) -> np.ndarray:
    """Joint precision of X under the single-record intervention pattern ``iv``."""
    b = np.asarray(b, dtype=float)
    k = b.shape[0]
    d = iv.d.astype(float)
    left = np.eye(k) - b * d[None, :]  # I - B D
    inner = d * noise.variances + (1.0 - d)  # diagonal of D Lambda^{-1} D + (I - D)
    return (left / inner[None, :]) @ left.T


def _factor(precision: np.ndarray):
    try:
        return cho_factor(precision, lower=True)
    except LinAlgError as e:
        raise PosteriorError(f"posterior precision is not positive definite: {e}")


def gaussian_posterior(
    b: np.ndarray,
    noise: NoiseModel,
    iv: InterventionMask,
    observed_idx: Sequence[int],
    observed_vals: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and precision of the missing coordinates given the observed ones.

    Args:
        b: K x K (already masked) weight matrix
        noise: Noise model
        iv: Intervention pattern of the record
        observed_idx: Observed coordinates; the rest are missing
        observed_vals: Values at ``observed_idx``

    Returns:
        (mean, precision) over the missing coordinates in ascending order

    Raises:
        PosteriorError: the conditional precision is not positive definite
    """
    precision = interventional_precision(b, noise, iv)
    k = precision.shape[0]
    observed = np.zeros(k, dtype=bool)
    observed[np.asarray(observed_idx, dtype=int)] = True
    missing = ~observed
    if not missing.any():
        return np.zeros(0), np.zeros((0, 0))
    cond = precision[np.ix_(missing, missing)]
    factor = _factor(cond)
    cross = precision[np.ix_(missing, observed)]
    mean = -cho_solve(factor, cross @ np.asarray(observed_vals, dtype=float))
    return mean, cond


def impute_gaussian(
    y: np.ndarray,
    r: np.ndarray,
    s: np.ndarray,
    b: np.ndarray,
    noise: NoiseModel,
    rng: Optional[np.random.Generator] = None,
) -> ImputedBatch:
    """Sample every record's missing block from its exact conditional Gaussian.

    Records are grouped by (missing pattern, intervention pattern) so each
    group shares one factorization.
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r)
    s = np.asarray(s)
    missing = r == 0
    if not missing.any():
        return ImputedBatch.pass_through(y, r, s)
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.where(missing, 0.0, y)
    keys = np.concatenate([missing, s.astype(bool)], axis=1)
    groups, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    k = y.shape[1]
    for g, key in enumerate(groups):
        miss = key[:k]
        if not miss.any():
            continue
        rows = np.flatnonzero(inverse == g)
        iv = InterventionMask(key[k:], np.zeros(k))
        precision = interventional_precision(b, noise, iv)
        cond = precision[np.ix_(miss, miss)]
        factor = _factor(cond)
        cross = precision[np.ix_(miss, ~miss)]
        means = -cho_solve(factor, cross @ x[np.ix_(rows, ~miss)].T).T
        lower = np.tril(factor[0])
        z = rng.standard_normal((rows.size, int(miss.sum())))
        draws = means + solve_triangular(lower.T, z.T, lower=False).T
        x[np.ix_(rows, miss)] = draws
    logger.debug(f"Gaussian E-step imputed {int(missing.any(axis=1).sum())} records in {len(groups)} groups")
    return ImputedBatch.pass_through(x, r, s)
