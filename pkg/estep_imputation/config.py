"""
Configuration for rejection-sampling imputation.
"""

from dataclasses import dataclass
from typing import Optional

from shared.config import require_choice, require_nonnegative, require_positive
from shared.constants import FALLBACKS

# Defaults
DEFAULT_PROPOSAL_SCALE = 2.0
DEFAULT_PILOT_DRAWS = 64
DEFAULT_MAX_ATTEMPTS = 200
DEFAULT_BLOCK_SIZE = 50
DEFAULT_CHUNK_SIZE = 256
DEFAULT_MAX_RESTARTS = 20
PROPOSAL_FAMILIES = ["gaussian"]


@dataclass
class RejectionConfig:
    """
    Rejection sampler settings.

    Attributes:
        proposal: proposal family (Gaussian around the fixed-point completion)
        proposal_scale: proposal variance as a multiple of the noise variance
        c0: initial envelope constant; None derives it from pilot draws
        pilot_draws: proposal draws used to set the envelope
        max_attempts: proposals per record before the fallback applies
        fallback: 'best-weight' keeps the heaviest draw seen, 'resample-proposal'
            resamples the seen draws proportionally to their weights
        samples_per_record: posterior draws emitted per record
        block_size: proposals evaluated per vectorized step
        chunk_size: records handed to one worker
        max_restarts: envelope-violation restarts per record
        seed: base of the per-record random streams
    """

    proposal: str = "gaussian"
    proposal_scale: float = DEFAULT_PROPOSAL_SCALE
    c0: Optional[float] = None
    pilot_draws: int = DEFAULT_PILOT_DRAWS
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    fallback: str = "best-weight"
    samples_per_record: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    chunk_size: int = DEFAULT_CHUNK_SIZE
    max_restarts: int = DEFAULT_MAX_RESTARTS
    seed: int = 0

    def __post_init__(self):
        require_choice("proposal", self.proposal, PROPOSAL_FAMILIES)
        require_choice("fallback", self.fallback, FALLBACKS)
        require_positive("proposal_scale", self.proposal_scale)
        if self.c0 is not None:
            require_positive("c0", self.c0)
        for name in ("pilot_draws", "max_attempts", "samples_per_record", "block_size", "chunk_size"):
            require_positive(name, getattr(self, name))
        require_nonnegative("max_restarts", self.max_restarts)
