"""
Gaussian noise model for the observed structural equations.
"""

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Independent N(0, variances[k]) noise; ``learnable`` exposes log-variances to the M-step."""

    variances: np.ndarray
    learnable: bool = False

    def __post_init__(self):
        variances = np.array(self.variances, dtype=float).reshape(-1)
        if variances.size == 0 or not np.all(variances > 0) or not np.all(np.isfinite(variances)):
            raise ValueError("noise variances must be finite and > 0")
        object.__setattr__(self, "variances", variances)

    @classmethod
    def isotropic(cls, k: int, sigma: float, learnable: bool = False) -> "NoiseModel":
        return cls(np.full(k, sigma**2), learnable=learnable)

    @property
    def k(self) -> int:
        return self.variances.size

    @property
    def log_variances(self) -> np.ndarray:
        return np.log(self.variances)

    @property
    def precision(self) -> np.ndarray:
        """Lambda = diag(1 / sigma^2)."""
        return np.diag(1.0 / self.variances)

    def with_log_variances(self, log_variances: np.ndarray) -> "NoiseModel":
        return NoiseModel(np.exp(log_variances), learnable=self.learnable)

    def log_density(self, eps: np.ndarray, observed: np.ndarray) -> np.ndarray:
        """Row sums of log N(eps_k; 0, sigma_k^2) over observed coordinates."""
        terms = -0.5 * (LOG_2PI + self.log_variances + eps**2 / self.variances)
        return np.sum(np.where(observed, terms, 0.0), axis=-1)

    def to_dict(self):
        return {"variances": self.variances.tolist(), "learnable": self.learnable}

    @classmethod
    def from_dict(cls, section) -> "NoiseModel":
        return cls(np.array(section["variances"], dtype=float), learnable=bool(section.get("learnable", False)))
