"""
Configuration for the stochastic log-determinant estimator.
"""

from dataclasses import dataclass

from shared.config import require_positive

# Defaults for the shifted-Poisson truncation: E[N] = n_min + rate = 4 terms
DEFAULT_POISSON_RATE = 2.0
DEFAULT_MIN_TERMS = 2
DEFAULT_HUTCHINSON_PROBES = 1
DEFAULT_DIAGNOSTIC_REPEATS = 200


@dataclass
class LogDetEstimatorConfig:
    """Russian-roulette power series with Hutchinson trace probes.

    The truncation point is N = n_min + Poisson(poisson_rate).
    """

    poisson_rate: float = DEFAULT_POISSON_RATE
    n_min: int = DEFAULT_MIN_TERMS
    num_hutchinson: int = DEFAULT_HUTCHINSON_PROBES
    seed: int = 0

    def __post_init__(self):
        require_positive("poisson_rate", self.poisson_rate)
        require_positive("n_min", self.n_min)
        require_positive("num_hutchinson", self.num_hutchinson)
