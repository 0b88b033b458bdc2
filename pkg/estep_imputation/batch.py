"""
Completed records produced by an E-step.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from sem_engine import InterventionMask


def interventions_of(y: np.ndarray, s: np.ndarray) -> InterventionMask:
    """Per-row intervention mask: s = 1 observed, s = 0 clamped to the recorded value."""
    return InterventionMask.from_indicators(np.asarray(s), np.asarray(y, dtype=float))


@dataclass
class ImputedBatch:
    """
    Completed records with their indicators.

    Attributes:
        x: (m, K) completed values; m = records * samples_per_record
        r: (m, K) missingness indicators of the source records
        s: (m, K) intervention indicators of the source records
        attempts: (m,) proposals spent per emitted row
        fallback: (m,) True where the fallback produced the row
        record_index: (m,) source record of every row
    """

    x: np.ndarray
    r: np.ndarray
    s: np.ndarray
    attempts: np.ndarray
    fallback: np.ndarray
    record_index: np.ndarray

    @classmethod
    def pass_through(cls, y: np.ndarray, r: np.ndarray, s: np.ndarray, record_index: Optional[np.ndarray] = None) -> "ImputedBatch":
        n = y.shape[0]
        return cls(
            x=np.array(y, dtype=float),
            r=np.asarray(r),
            s=np.asarray(s),
            attempts=np.ones(n, dtype=int),
            fallback=np.zeros(n, dtype=bool),
            record_index=np.arange(n) if record_index is None else record_index,
        )

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def interventions(self) -> InterventionMask:
        return interventions_of(self.x, self.s)

    def rows(self, index) -> "ImputedBatch":
        return ImputedBatch(
            x=self.x[index],
            r=self.r[index],
            s=self.s[index],
            attempts=self.attempts[index],
            fallback=self.fallback[index],
            record_index=self.record_index[index],
        )

    def acceptance_stats(self) -> dict:
        """Record count, mean attempts and fallback count for rows with missing entries."""
        imputed = np.any(np.asarray(self.r) == 0, axis=1)
        return {
            "records": int(imputed.sum()),
            "mean_attempts": float(self.attempts[imputed].mean()) if imputed.any() else 0.0,
            "fallback_count": int(self.fallback[imputed].sum()),
        }
