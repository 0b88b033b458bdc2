"""
Block-parallel logistic missingness: P(R_k = 0 | x) = expit(w_k^T x + z_k) with w_kk = 0.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, log_expit

from graph_model import EdgePattern
from shared.config import require_positive
from shared.exceptions import DataError

Coordinates = Union[None, Iterable[int], np.ndarray]


@dataclass(frozen=True, eq=False)
class MnarModel:
    """Per-indicator logistic mechanism.

    Attributes:
        w: K x K weights, column k feeds indicator R_k; diagonal frozen at zero
        z: K intercepts
        parent_pattern: optional X -> R support; weights outside it must be zero
    """

    w: np.ndarray
    z: np.ndarray
    parent_pattern: Optional[EdgePattern] = None

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        z = np.array(self.z, dtype=float).reshape(-1)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or z.shape != (w.shape[0],):
            raise ValueError(f"inconsistent mechanism shapes: w {w.shape}, z {z.shape}")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("self-censoring weights (diagonal of w) must be zero")
        if self.parent_pattern is not None:
            if self.parent_pattern.k != w.shape[0]:
                raise ValueError("parent pattern size differs from w")
            if np.any(w[self.parent_pattern.edges == 0] != 0.0):
                raise ValueError("w has weights outside the parent pattern")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return self.z.size

    @classmethod
    def zeros(cls, k: int, z: Optional[np.ndarray] = None) -> "MnarModel":
        return cls(np.zeros((k, k)), np.zeros(k) if z is None else z)

    def support(self) -> np.ndarray:
        """0/1 matrix of trainable weight positions."""
        if self.parent_pattern is not None:
            return self.parent_pattern.edges.astype(float)
        support = np.ones((self.k, self.k))
        np.fill_diagonal(support, 0.0)
        return support

    def with_params(self, w: np.ndarray, z: np.ndarray) -> "MnarModel":
        return MnarModel(w * self.support(), z, self.parent_pattern)

    def to_dict(self):
        section = {"w": self.w.tolist(), "z": self.z.tolist()}
        if self.parent_pattern is not None:
            section["parent_pattern"] = self.parent_pattern.edges.astype(int).tolist()
        return section

    @classmethod
    def from_dict(cls, section) -> "MnarModel":
        try:
            pattern = section.get("parent_pattern")
            return cls(
                np.array(section["w"], dtype=float),
                np.array(section["z"], dtype=float),
                EdgePattern(np.array(pattern)) if pattern is not None else None,
            )
        except KeyError as e:
            raise DataError(f"checkpoint section 'mnar' lacks field {e}")
        except ValueError as e:
            raise DataError(f"checkpoint section 'mnar' is invalid: {e}")


def _logits(model: MnarModel, x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float) @ model.w + model.z


def _skip_mask(skip: Coordinates, shape: Tuple[int, ...]) -> np.ndarray:
    """Boolean mask of skipped coordinates from an index set or a boolean array."""
    mask = np.zeros(shape, dtype=bool)
    if skip is None:
        return mask
    skip = np.asarray(skip)
    if skip.dtype == bool:
        return np.broadcast_to(skip, shape).copy()
    if skip.size:
        mask[..., skip.astype(int)] = True
    return mask


def prob_missing(model: MnarModel, x: np.ndarray) -> np.ndarray:
    """p_k = P(R_k = 0 | x) for a K-vector or each row of an (n, K) batch."""
    return expit(_logits(model, x))


def log_prob_r_rows(model: MnarModel, r: np.ndarray, x: np.ndarray, skip: Coordinates = None) -> np.ndarray:
    """Row-wise sum over non-skipped k of (1 - r_k) log p_k + r_k log(1 - p_k)."""
    r = np.asarray(r, dtype=float)
    a = _logits(model, x)
    terms = (1.0 - r) * log_expit(a) + r * log_expit(-a)
    return np.sum(np.where(_skip_mask(skip, a.shape), 0.0, terms), axis=-1)


def log_prob_r(model: MnarModel, r: np.ndarray, x: np.ndarray, skip: Coordinates = None) -> float:
    """log p(r | x) for one record; ``skip`` holds coordinates whose indicator is structurally 1."""
    return float(log_prob_r_rows(model, r, x, skip))


def log_prob_r_grad(model: MnarModel, r: np.ndarray, x: np.ndarray, skip: Coordinates = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row values plus gradients of their sum w.r.t. (w, z).

    The derivative of each factor w.r.t. its logit is (1 - r_k) - p_k.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    a = _logits(model, x)
    keep = ~_skip_mask(skip, a.shape)
    values = np.sum(np.where(keep, (1.0 - r) * log_expit(a) + r * log_expit(-a), 0.0), axis=-1)
    g = np.where(keep, (1.0 - r) - expit(a), 0.0)
    grad_w = (x.T @ g) * model.support()
    return values, grad_w, g.sum(axis=0)


def sample_r(model: MnarModel, x: np.ndarray, protected: Coordinates, rng: np.random.Generator) -> np.ndarray:
    """R_k ~ Bernoulli(1 - p_k) independently, forced to 1 on ``protected`` coordinates."""
    p = prob_missing(model, x)
    r = (rng.random(p.shape) >= p).astype(np.int8)
    r[_skip_mask(protected, p.shape)] = 1
    return r


def extract_m_edges(model: MnarModel, threshold: float) -> EdgePattern:
    """Edge X_j -> R_k iff |w_jk| > threshold."""
    require_positive("threshold", threshold)
    return EdgePattern.from_matrix(model.w, threshold)
