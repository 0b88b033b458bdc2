"""
Gumbel-softmax dependency masks and intervention masks.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from shared.config import require_positive


@dataclass(frozen=True)
class GumbelMask:
    """Edge-mask distribution p(M | gamma).

    Attributes:
        logits: K x K logits gamma; the diagonal never contributes (self-loops masked)
        temperature: relaxation temperature tau
        hard: straight-through discretization of the sampled values
    """

    logits: np.ndarray
    temperature: float = 1.0
    hard: bool = False

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=float)
        if logits.ndim != 2 or logits.shape[0] != logits.shape[1]:
            raise ValueError(f"mask logits must be square, got shape {logits.shape}")
        require_positive("temperature", self.temperature)
        object.__setattr__(self, "logits", logits)

    @property
    def k(self) -> int:
        return self.logits.shape[0]

    @classmethod
    def zeros(cls, k: int, temperature: float = 1.0, hard: bool = False) -> "GumbelMask":
        return cls(np.zeros((k, k)), temperature=temperature, hard=hard)

    def with_logits(self, logits: np.ndarray) -> "GumbelMask":
        return GumbelMask(logits, temperature=self.temperature, hard=self.hard)

    def with_temperature(self, temperature: float) -> "GumbelMask":
        return GumbelMask(self.logits, temperature=temperature, hard=self.hard)


@dataclass(frozen=True)
class MaskSample:
    """One relaxed draw; ``noise`` is the logistic difference g1 - g0."""

    noise: np.ndarray
    soft: np.ndarray
    values: np.ndarray
    temperature: float


def _zero_diagonal(m: np.ndarray) -> np.ndarray:
    m = m.copy()
    np.fill_diagonal(m, 0.0)
    return m


def mask_from_noise(mask: GumbelMask, noise: np.ndarray) -> MaskSample:
    """Rebuild a relaxed sample from fixed Gumbel noise (used to replay draws)."""
    soft = _zero_diagonal(expit((mask.logits + noise) / mask.temperature))
    values = (soft > 0.5).astype(float) if mask.hard else soft
    return MaskSample(noise=noise, soft=soft, values=values, temperature=mask.temperature)


def draw_mask(mask: GumbelMask, rng: np.random.Generator) -> MaskSample:
    g1 = rng.gumbel(size=mask.logits.shape)
    g0 = rng.gumbel(size=mask.logits.shape)
    return mask_from_noise(mask, g1 - g0)


def sample_mask(mask: GumbelMask, rng: np.random.Generator) -> np.ndarray:
    """Sample M with entries sigmoid((gamma + g1 - g0) / tau) and a zero diagonal."""
    return draw_mask(mask, rng).values


def expected_mask(mask: GumbelMask) -> np.ndarray:
    """Edge inclusion probabilities sigmoid(gamma) with a zero diagonal."""
    return _zero_diagonal(expit(mask.logits))


def hard_mask(mask: GumbelMask) -> np.ndarray:
    """Deterministic 0/1 mask used at graph-extraction time."""
    return (expected_mask(mask) > 0.5).astype(float)


def mask_logit_gradient(sample: MaskSample, grad_values: np.ndarray) -> np.ndarray:
    """Chain dObjective/dM into dObjective/dgamma through the soft relaxation.

    The hard (straight-through) case uses the same soft derivative.
    """
    grad = grad_values * sample.soft * (1.0 - sample.soft) / sample.temperature
    return _zero_diagonal(grad)


@dataclass(frozen=True)
class InterventionMask:
    """Hard-intervention pattern for one record (1-D) or a batch (2-D).

    Attributes:
        d: True where the node is purely observed (not intervened)
        c: clamp values for intervened nodes, zero where ``d`` is True
    """

    d: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d).astype(bool)
        c = np.asarray(self.c, dtype=float)
        if d.shape != c.shape:
            raise ValueError(f"d and c shapes differ: {d.shape} vs {c.shape}")
        if np.any(c[d] != 0.0):
            raise ValueError("clamp values must be zero on observed (non-intervened) nodes")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.d.shape[-1]

    @classmethod
    def observational(cls, k: int, n: Optional[int] = None) -> "InterventionMask":
        shape = (k,) if n is None else (n, k)
        return cls(np.ones(shape, dtype=bool), np.zeros(shape))

    @classmethod
    def from_targets(cls, k: int, targets: Sequence[int], values: Sequence[float]) -> "InterventionMask":
        d = np.ones(k, dtype=bool)
        c = np.zeros(k)
        for node, value in zip(targets, values):
            d[node] = False
            c[node] = value
        return cls(d, c)

    @classmethod
    def from_indicators(cls, s: np.ndarray, values: np.ndarray) -> "InterventionMask":
        """Build from dataset indicators (s = 1 observed, s = 0 intervened) and values."""
        d = np.asarray(s).astype(bool)
        c = np.where(d, 0.0, np.nan_to_num(np.asarray(values, dtype=float)))
        return cls(d, c)

    def batch(self, n: int) -> "InterventionMask":
        """2-D view with ``n`` rows (broadcasting a single-record mask)."""
        if self.d.ndim == 2:
            if self.d.shape[0] != n:
                raise ValueError(f"mask has {self.d.shape[0]} rows, expected {n}")
            return self
        return InterventionMask(np.broadcast_to(self.d, (n, self.k)).copy(), np.broadcast_to(self.c, (n, self.k)).copy())

    def rows(self, index) -> "InterventionMask":
        return InterventionMask(self.d[index], self.c[index])
