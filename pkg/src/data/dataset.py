import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

ColumnKind = Literal["continuous", "discrete"]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """Real-valued table with named columns stored as an (n_rows, n_columns) array."""

    columns: Tuple[str, ...]
    values: np.ndarray
    kinds: Tuple[ColumnKind, ...] = field(default=())

    def __post_init__(self):
        columns = tuple(self.columns)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and len(columns) == 1:
            values = values.reshape(-1, 1)
        if values.size == 0:
            values = values.reshape(0, len(columns))
        if values.ndim != 2 or values.shape[1] != len(columns):
            raise ValueError(f"Values of shape {values.shape} do not match {len(columns)} columns")
        if len(set(columns)) != len(columns):
            raise ValueError("Column labels must be unique")
        if not np.all(np.isfinite(values)):
            raise ValueError("Dataset values must be finite")
        kinds = tuple(self.kinds) or ("continuous",) * len(columns)
        if len(kinds) != len(columns):
            raise ValueError("One kind per column is required")
        for name, kind, column in zip(columns, kinds, values.T):
            if kind == "discrete" and not np.all(np.equal(np.mod(column, 1), 0)):
                raise ValueError(f"Discrete column {name!r} has non-integer entries")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "kinds", kinds)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def kind(self, name: str) -> ColumnKind:
        return self.kinds[self.index(name)]

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.index(n) for n in names]
        return Dataset(tuple(names), self.values[:, idx], tuple(self.kinds[i] for i in idx))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.columns))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.kinds == other.kinds
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None


@dataclass(frozen=True)
class DiscretizedDataset:
    """Integer-coded table with the bin metadata that produced each column.

    `boundaries[c]` holds bin edges for equal-width columns and the lower
    value of each realized bin for equal-frequency columns.
    """

    columns: Tuple[str, ...]
    codes: np.ndarray
    bins: Tuple[int, ...]
    boundaries: Tuple[np.ndarray, ...] = field(default=())
    degenerate: Tuple[bool, ...] = field(default=())

    def __post_init__(self):
        columns = tuple(self.columns)
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(columns):
            raise ValueError(f"Codes of shape {codes.shape} do not match {len(columns)} columns")
        bins = tuple(int(k) for k in self.bins)
        if len(bins) != len(columns):
            raise ValueError("One bin count per column is required")
        if codes.size and (codes.min() < 0 or np.any(codes.max(axis=0) > np.array(bins) - 1)):
            raise ValueError("Codes must lie in [0, k-1]")
        boundaries = tuple(np.asarray(b, dtype=float) for b in self.boundaries) or tuple(
            np.array([]) for _ in columns
        )
        for name, bound in zip(columns, boundaries):
            if bound.size > 1 and not np.all(np.diff(bound) > 0):
                raise ValueError(f"Boundaries of {name!r} are not strictly increasing")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "codes", _readonly(codes))
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "boundaries", boundaries)
        object.__setattr__(self, "degenerate", tuple(self.degenerate) or (False,) * len(columns))

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "DiscretizedDataset":
        idx = [self.index(n) for n in names]
        return DiscretizedDataset(
            tuple(names),
            self.codes[:, idx],
            tuple(self.bins[i] for i in idx),
            tuple(self.boundaries[i] for i in idx),
            tuple(self.degenerate[i] for i in idx),
        )

    def observed_codes(self, column: int) -> List[int]:
        return [int(c) for c in np.unique(self.codes[:, column])]

    def bin_summary(self) -> Dict[str, Dict]:
        return {
            name: {"bins": k, "boundaries": bound.tolist(), "degenerate": flag}
            for name, k, bound, flag in zip(self.columns, self.bins, self.boundaries, self.degenerate)
        }

    __hash__ = None
