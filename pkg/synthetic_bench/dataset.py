"""
Datasets of coarsened records and their CSV codec.

CSV layout: header ``x_1..x_K,r_1..r_K,s_1..s_K``, one record per row, ``?``
where a value is missing. r_k = 1 means observed, s_k = 0 means intervened.
"""

import logging
import re
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import pandas as pd

from sem_engine import InterventionMask
from shared.constants import ERROR_MESSAGES, MISSING_TOKEN
from shared.exceptions import DataError

logger = logging.getLogger(__name__)

# pandas reports over-long rows only through the parser message
_RAGGED_PATTERN = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def column_names(k: int) -> List[str]:
    return [f"{prefix}_{i}" for prefix in ("x", "r", "s") for i in range(1, k + 1)]


@dataclass(eq=False)
class Dataset:
    """
    n records of (y, r, s).

    Attributes:
        y: (n, K) values, NaN where r = 0 (unless pre-imputed)
        r: (n, K) missingness indicators, 1 observed
        s: (n, K) intervention indicators, 0 intervened
        ignorable: the missingness mechanism is MCAR or MAR
        pre_imputed: values were filled externally; r keeps the original pattern
        provenance: hash of the generating InstanceSpec, if any
    """

    y: np.ndarray
    r: np.ndarray
    s: np.ndarray
    ignorable: bool = False
    pre_imputed: bool = False
    provenance: str = ""

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.r = np.asarray(self.r).astype(np.int8)
        self.s = np.asarray(self.s).astype(np.int8)
        self.validate()

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.y.shape[1]

    @property
    def has_missing(self) -> bool:
        return bool(np.any(self.r == 0))

    @property
    def complete_rows(self) -> np.ndarray:
        return np.all(self.r == 1, axis=1)

    @property
    def missing_rate(self) -> float:
        """Share of missing cells among non-intervened cells."""
        eligible = self.s == 1
        return float(np.sum((self.r == 0) & eligible) / max(int(eligible.sum()), 1))

    def interventions(self) -> InterventionMask:
        return InterventionMask.from_indicators(self.s, self.y)

    def validate(self) -> None:
        """Check shapes and the y / r / s consistency rules, naming the first bad row."""
        if self.y.ndim != 2 or self.r.shape != self.y.shape or self.s.shape != self.y.shape:
            raise DataError(f"y, r, s shapes differ: {self.y.shape}, {self.r.shape}, {self.s.shape}")
        if not np.isin(self.r, (0, 1)).all() or not np.isin(self.s, (0, 1)).all():
            raise DataError("r and s must be binary")
        finite = np.isfinite(self.y)
        if self.pre_imputed:
            bad = ~finite
        else:
            bad = finite != (self.r == 1)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DataError(
                ERROR_MESSAGES["missing_flag_mismatch"].format(row=row + 1, column=f"x_{col + 1}", r=int(self.r[row, col])),
                row=int(row) + 1,
            )
        unprotected = (self.s == 0) & (self.r == 0)
        if unprotected.any():
            row, col = np.argwhere(unprotected)[0]
            raise DataError(ERROR_MESSAGES["unprotected_intervention"].format(row=row + 1, node=col + 1), row=int(row) + 1)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.r[rows], self.s[rows], self.ignorable, self.pre_imputed, self.provenance)

    def complete_data_view(self, x: np.ndarray) -> "Dataset":
        """Same records with fully observed values ``x`` (the control without missingness)."""
        return Dataset(np.asarray(x, dtype=float), np.ones_like(self.r), self.s, True, False, self.provenance)


def split_dataset(data: Dataset, test_fraction: float = 0.1, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Deterministic random split into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1) (got {test_fraction})")
    order = np.random.default_rng(seed).permutation(data.n)
    n_test = max(1, int(round(test_fraction * data.n)))
    test, train = np.sort(order[:n_test]), np.sort(order[n_test:])
    return data.subset(train), data.subset(test)


def write_dataset(data: Dataset, path: str) -> str:
    """Write the CSV with 17 significant digits and ``?`` for missing values."""
    k = data.k
    y = data.y if data.pre_imputed else np.where(data.r == 1, data.y, np.nan)
    frame = pd.DataFrame(np.asarray(y), columns=pd.Index(column_names(k)[:k]))
    for prefix, values in (("r", data.r), ("s", data.s)):
        for i in range(k):
            frame[f"{prefix}_{i + 1}"] = values[:, i].astype(int)
    frame.to_csv(path, index=False, na_rep=MISSING_TOKEN, float_format="%.17g")
    logger.info(f"Wrote {data.n} records to {path}")
    return path


def _load_cells(path: str) -> pd.DataFrame:
    """Every cell as text; frame index i is file line i + 1, blank lines kept as all-NaN rows."""
    try:
        return pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"dataset not found: {path}")
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: empty file")
    except pd.errors.ParserError as e:
        match = _RAGGED_PATTERN.search(str(e))
        if match is None:
            raise DataError(f"{path}: {e}")
        expected, line, found = (int(v) for v in match.groups())
        row = line - 1
        raise DataError(ERROR_MESSAGES["ragged_row"].format(row=row, expected=expected, found=found), row=row)


def _first_bad(bad: np.ndarray, rows: pd.Index, columns: List[str], cells: np.ndarray) -> None:
    if bad.any():
        i, j = np.argwhere(bad)[0]
        row = int(rows[i])
        raise DataError(ERROR_MESSAGES["bad_cell"].format(row=row, column=columns[j], value=cells[i, j]), row=row)


def read_dataset(path: str, pre_imputed: bool = False) -> Dataset:
    """
    Parse and validate a dataset CSV.

    Args:
        path: CSV file
        pre_imputed: accept values where r = 0 (externally imputed input)

    Returns:
        Dataset

    Raises:
        DataError: malformed header, ragged row, unparsable cell or an invariant violation;
            the message names the data row (1-based, header excluded)
    """
    frame = _load_cells(path)
    header = [str(v) for v in frame.iloc[0] if isinstance(v, str)]
    if len(header) % 3 != 0 or not header or header != column_names(len(header) // 3) or len(header) != frame.shape[1]:
        expected = ",".join(column_names(max(len(header) // 3, 1)))
        raise DataError(ERROR_MESSAGES["bad_header"].format(expected=expected, found=",".join(header)), row=0)
    k = len(header) // 3

    body = frame.iloc[1:]
    body = body[~body.isna().all(axis=1)]
    if body.empty:
        raise DataError(f"{path}: no records")
    short = body.isna().any(axis=1)
    if short.any():
        row = int(short.idxmax())
        found = int(body.loc[row].notna().sum())
        raise DataError(ERROR_MESSAGES["ragged_row"].format(row=row, expected=3 * k, found=found), row=row)

    cells = body.to_numpy(dtype=object)
    values = cells[:, :k]
    missing = values == MISSING_TOKEN
    y = body.iloc[:, :k].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    y[missing] = np.nan
    _first_bad(~missing & ~np.isfinite(y), body.index, header[:k], values)
    flags = cells[:, k:]
    _first_bad(~np.isin(flags, ["0", "1"]), body.index, header[k:], flags)
    flags = (flags == "1").astype(int)

    data = Dataset(y, flags[:, :k], flags[:, k:], pre_imputed=pre_imputed)
    logger.info(f"Read {data.n} records over {data.k} nodes from {path}")
    return data
