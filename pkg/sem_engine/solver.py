"""
Residual maps and fixed-point forward simulation under hard interventions.
"""

import logging
from typing import Tuple

import numpy as np

from shared.constants import ERROR_MESSAGES, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL
from shared.exceptions import DimensionMismatchError, FixedPointError

from .masks import InterventionMask
from .models import SemModel

logger = logging.getLogger(__name__)


def _check_dims(model: SemModel, mask: np.ndarray, x: np.ndarray) -> None:
    if x.shape[-1] != model.k:
        raise DimensionMismatchError(ERROR_MESSAGES["dimension_mismatch"].format(left=x.shape[-1], right=model.k))
    if np.shape(mask) != (model.k, model.k):
        raise DimensionMismatchError(ERROR_MESSAGES["dimension_mismatch"].format(left=np.shape(mask), right=(model.k, model.k)))


def _as_rows(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def forward_f(model: SemModel, mask: np.ndarray, x: np.ndarray) -> np.ndarray:
    """F(x) for a single K-vector or an (n, K) batch."""
    rows, single = _as_rows(x)
    _check_dims(model, mask, rows)
    out = model.forward(rows, np.asarray(mask, dtype=float))
    return out[0] if single else out


def residuals(model: SemModel, mask: np.ndarray, x: np.ndarray, iv: InterventionMask) -> np.ndarray:
    """Batch residuals x - F(x) on observed coordinates, zero on intervened ones."""
    rows, _ = _as_rows(x)
    d = iv.batch(rows.shape[0]).d
    return np.where(d, rows - forward_f(model, mask, rows), 0.0)


def epsilon_observed(model: SemModel, mask: np.ndarray, x: np.ndarray, iv: InterventionMask) -> np.ndarray:
    """Noise recovered on the observed coordinates of one record (intervened ones dropped)."""
    x = np.asarray(x, dtype=float)
    eps = x - forward_f(model, mask, x)
    return eps[iv.d]


def solve_fixed_point(
    model: SemModel,
    mask: np.ndarray,
    iv: InterventionMask,
    eps: np.ndarray,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> np.ndarray:
    """Picard iteration x <- D F(x) + D eps + c started from D eps + c.

    Accepts a single noise vector or an (n, K) batch; the intervention mask is
    broadcast to the batch. Returned rows satisfy |x - (D F(x) + D eps + c)| <= tol.

    Raises:
        FixedPointError: when the iteration has not converged after ``max_iter`` steps
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0 (got {tol})")
    eps_rows, single = _as_rows(eps)
    _check_dims(model, mask, eps_rows)
    mask = np.asarray(mask, dtype=float)
    batch_iv = iv.batch(eps_rows.shape[0])
    d = batch_iv.d.astype(float)
    base = d * eps_rows + batch_iv.c

    x = base
    step = np.inf
    for it in range(max_iter):
        x_next = d * model.forward(x, mask) + base
        step = np.max(np.abs(x_next - x)) if x.size else 0.0
        x = x_next
        if not np.isfinite(step):
            break
        if step <= tol:
            logger.debug(f"Fixed point reached after {it + 1} iterations")
            return x[0] if single else x
    raise FixedPointError(f"fixed-point iteration did not converge within {max_iter} steps (last step {step:.3e})")
