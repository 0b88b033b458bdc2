"""
Structure-recovery metrics between directed edge patterns.
"""

from typing import Dict

import numpy as np

from shared.constants import ERROR_MESSAGES
from shared.exceptions import DimensionMismatchError

from .patterns import EdgePattern


def _check_same_size(estimated: EdgePattern, truth: EdgePattern) -> None:
    if estimated.k != truth.k:
        raise DimensionMismatchError(ERROR_MESSAGES["dimension_mismatch"].format(left=estimated.k, right=truth.k))


def shd(estimated: EdgePattern, truth: EdgePattern, count_reversal_twice: bool = False) -> int:
    """Structural Hamming distance.

    Each unordered node pair {j, k} is compared as the couple of directed
    entries (j->k, k->j). A pair that differs costs one edit, which makes a
    pure reversal a single operation; a missed 2-cycle also costs one. With
    ``count_reversal_twice`` every differing directed entry costs one, so a
    reversal costs two.
    """
    _check_same_size(estimated, truth)
    diff = (estimated.edges != truth.edges).astype(int)
    if count_reversal_twice:
        return int(diff.sum())
    pair_diff = np.triu(diff + diff.T, 1)
    return int(np.count_nonzero(pair_diff))


def edge_precision_recall(estimated: EdgePattern, truth: EdgePattern) -> Dict[str, float]:
    """Directed-edge precision/recall. Empty estimates score precision 1."""
    _check_same_size(estimated, truth)
    est = estimated.edges.astype(bool)
    true = truth.edges.astype(bool)
    tp = int(np.sum(est & true))
    n_est = int(est.sum())
    n_true = int(true.sum())
    return {
        "true_positives": tp,
        "precision": tp / n_est if n_est else 1.0,
        "recall": tp / n_true if n_true else 1.0,
    }
