"""
Directed edge patterns and Erdos-Renyi generation.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from shared.config import require_nonnegative
from shared.exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgePattern:
    """Binary adjacency over K nodes; ``edges[j, k] == 1`` means X_j -> X_k.

    The same type holds X -> R missingness edges, where column k lists the
    parents of R_k.
    """

    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1]:
            raise ValueError(f"edge matrix must be square, got shape {edges.shape}")
        if edges.shape[0] < 1:
            raise ValueError("edge pattern needs at least one node")
        if not np.isin(edges, (0, 1)).all():
            raise ValueError("edge matrix must be binary")
        edges = edges.astype(np.int8)
        if np.any(np.diag(edges)):
            raise ValueError("self-loops are not allowed (diagonal must be zero)")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def k(self) -> int:
        return self.edges.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.edges.sum())

    def edge_list(self) -> List[Tuple[int, int]]:
        return [(int(j), int(k)) for j, k in zip(*np.nonzero(self.edges))]

    @classmethod
    def empty(cls, k: int) -> "EdgePattern":
        return cls(np.zeros((k, k), dtype=np.int8))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, threshold: float = 0.0) -> "EdgePattern":
        """Pattern of entries whose magnitude exceeds ``threshold``, diagonal dropped."""
        support = (np.abs(np.asarray(matrix, dtype=float)) > threshold).astype(np.int8)
        np.fill_diagonal(support, 0)
        return cls(support)

    def __eq__(self, other):
        if not isinstance(other, EdgePattern):
            return NotImplemented
        return self.edges.shape == other.edges.shape and bool(np.array_equal(self.edges, other.edges))

    def __hash__(self):
        return hash(self.edges.tobytes())

    def to_csv(self, path: str) -> str:
        """Write a dense 0/1 CSV: K rows, K columns, no header."""
        pd.DataFrame(self.edges.astype(int)).to_csv(path, header=False, index=False)
        return path

    @classmethod
    def from_csv(cls, path: str) -> "EdgePattern":
        try:
            frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
        except (FileNotFoundError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise DataError(f"edge pattern {path}: {e}")
        short = frame.isna().any(axis=1)
        if short.any():
            row = int(short.idxmax()) + 1
            raise DataError(f"Row {row}: expected {frame.shape[1]} columns, found {int(frame.iloc[row - 1].notna().sum())}", row=row)
        if frame.shape[0] != frame.shape[1]:
            raise DataError(f"edge pattern {path}: expected a square matrix, found {frame.shape[0]} x {frame.shape[1]}")
        cells = frame.to_numpy(dtype=object)
        if not np.isin(cells, ["0", "1"]).all():
            raise DataError(f"edge pattern {path}: entries must be 0 or 1")
        return cls((cells == "1").astype(np.int8))


@dataclass
class ErConfig:
    """Erdos-Renyi generator settings (ER-1 -> expected_degree 1.0, ER-2 -> 2.0)."""

    k: int
    expected_degree: float = 1.0
    allow_cycles: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"node count must be >= 1 (got {self.k})", field="k")
        require_nonnegative("expected_degree", self.expected_degree)
        p = self.edge_probability
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"derived edge probability {p:.4f} outside [0, 1]", field="expected_degree")

    @property
    def edge_probability(self) -> float:
        if self.k == 1:
            return 0.0
        return self.expected_degree / (self.k - 1)


def generate_er(cfg: ErConfig, rng: Optional[np.random.Generator] = None) -> EdgePattern:
    """Sample a directed ER graph with expected edge count ``expected_degree * K``.

    Off-diagonal entries are i.i.d. Bernoulli(expected_degree / (K - 1)). When
    cycles are not allowed a uniformly random node order is drawn and only
    forward edges are kept.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    k = cfg.k
    edges = (rng.random((k, k)) < cfg.edge_probability).astype(np.int8)
    np.fill_diagonal(edges, 0)
    if not cfg.allow_cycles:
        rank = np.empty(k, dtype=int)
        rank[rng.permutation(k)] = np.arange(k)
        edges = edges * (rank[:, None] < rank[None, :])
    logger.debug(f"Generated ER graph with {int(edges.sum())} edges over {k} nodes")
    return EdgePattern(edges.astype(np.int8))
