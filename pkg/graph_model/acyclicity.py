"""
Acyclicity penalty, transitive closure helpers and power-iteration spectral norms.
"""

import logging
from typing import Optional

import numpy as np
import scipy.linalg as slin

from shared.constants import ACYCLIC_TOL

from .patterns import EdgePattern

logger = logging.getLogger(__name__)


def _require_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def acyclicity_penalty(m: np.ndarray) -> float:
    """Tr(exp(m * m)) - K; zero exactly when the support of ``m`` is acyclic."""
    m = _require_square(m)
    e = slin.expm(m * m)
    return float(max(np.trace(e) - m.shape[0], 0.0))


def acyclicity_penalty_grad(m: np.ndarray) -> np.ndarray:
    """Gradient of :func:`acyclicity_penalty` with respect to ``m``."""
    m = _require_square(m)
    return slin.expm(m * m).T * 2.0 * m


def is_acyclic(pattern: EdgePattern) -> bool:
    return acyclicity_penalty(pattern.edges) < ACYCLIC_TOL


def transitive_closure(edges: np.ndarray) -> np.ndarray:
    """reach[i, j] is True when a directed path of length >= 1 leads from i to j."""
    reach = np.asarray(edges, dtype=bool).copy()
    for i in range(reach.shape[0]):
        reach |= reach[:, i : i + 1] & reach[i : i + 1, :]
    return reach


def prune_to_acyclic(pattern: EdgePattern, strength: np.ndarray) -> EdgePattern:
    """Greedily drop the weakest edge lying on a cycle until the pattern is acyclic."""
    edges = pattern.edges.astype(np.int8).copy()
    strength = np.abs(np.asarray(strength, dtype=float))
    removed = 0
    while True:
        reach = transitive_closure(edges)
        on_cycle = edges.astype(bool) & reach.T
        if not on_cycle.any():
            break
        candidates = np.where(on_cycle, strength, np.inf)
        j, k = np.unravel_index(np.argmin(candidates), candidates.shape)
        edges[j, k] = 0
        removed += 1
    if removed:
        logger.info(f"Pruned {removed} edge(s) to obtain an acyclic graph")
    return EdgePattern(edges)


def spectral_norm(
    weights: np.ndarray,
    max_iter: int = 5000,
    tol: float = 1e-12,
    min_iter: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Largest singular value by power iteration on W^T W.

    Runs at least ``min_iter`` iterations (fewer if ``max_iter`` is smaller) and
    stops once the relative change of the estimate drops below ``tol``.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or not np.any(w):
        return 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    v = rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(max_iter):
        u = w @ v
        u_norm = np.linalg.norm(u)
        if u_norm == 0.0:
            # start vector landed in the null space
            v = rng.standard_normal(w.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w.T @ (u / u_norm)
        v_norm = np.linalg.norm(v)
        new_sigma = v_norm
        v /= v_norm
        if it + 1 >= min(min_iter, max_iter) and abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(sigma)


def is_contractive_spectral(weights: np.ndarray, bound: float) -> bool:
    """True iff the operator 2-norm of ``weights`` is at most ``bound``."""
    return spectral_norm(_require_square(weights, "weights")) <= bound
