import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.stats import rankdata

from src.data.dataset import Dataset, DiscretizedDataset
from src.utils.errors import DegenerateColumnError

logger = logging.getLogger(__name__)

Scheme = Literal["equal_width", "equal_frequency"]


@dataclass(frozen=True)
class Discretization:
    codes: np.ndarray
    boundaries: np.ndarray
    degenerate: bool = False


def _prepare(values, k: int) -> np.ndarray:
    if k < 2:
        raise ValueError("At least two bins are required")
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("Cannot discretize an empty column")
    return values


def discretize_equal_width(values, k: int) -> Discretization:
    """Split [min, max] into k equal intervals; the maximum maps to k-1.

    A constant column yields all-zero codes with the degenerate flag set.
    """
    values = _prepare(values, k)
    low, high = values.min(), values.max()
    if high == low:
        logger.warning("Equal-width discretization of a constant column")
        return Discretization(np.zeros(values.size, dtype=np.int64), np.array([low]), degenerate=True)
    codes = np.floor(k * (values - low) / (high - low)).astype(np.int64)
    codes = np.clip(codes, 0, k - 1)
    return Discretization(codes, np.linspace(low, high, k + 1))


def discretize_equal_frequency(values, k: int) -> Discretization:
    """Bin by sample quantiles: code = floor(k * rank / n) with tied values sharing the lowest rank.

    Ties therefore always fall into the lower code; with all-distinct values the
    bin sizes differ by at most one.
    """
    values = _prepare(values, k)
    if values.max() == values.min():
        logger.warning("Equal-frequency discretization of a constant column")
        return Discretization(np.zeros(values.size, dtype=np.int64), np.array([values[0]]), degenerate=True)
    ranks = rankdata(values, method="min") - 1
    codes = np.floor(k * ranks / values.size).astype(np.int64)
    codes = np.clip(codes, 0, k - 1)
    boundaries = np.array([values[codes == c].min() for c in np.unique(codes)])
    return Discretization(codes, boundaries)


def make_binary_target(values) -> np.ndarray:
    """Equal-width split into two halves; 1 marks the upper half (the positive class)."""
    result = discretize_equal_width(values, 2)
    if result.degenerate:
        raise DegenerateColumnError(message="Target column is constant and cannot be binarized")
    return result.codes


def _compact_codes(column: np.ndarray) -> Discretization:
    levels, codes = np.unique(column, return_inverse=True)
    return Discretization(codes.astype(np.int64), levels.astype(float), degenerate=levels.size < 2)


def discretize_dataset(
    dataset: Dataset,
    bins: int,
    scheme: Scheme = "equal_width",
    target: Optional[str] = None,
) -> DiscretizedDataset:
    """Discretize every column of a dataset.

    Continuous explanatory columns use `scheme` with `bins` bins, discrete
    columns keep their ordering as compact codes 0..m-1, and the target (when
    given) is binarized with `make_binary_target`.
    """
    schemes = {"equal_width": discretize_equal_width, "equal_frequency": discretize_equal_frequency}
    if scheme not in schemes:
        raise ValueError(f"Unknown discretization scheme {scheme!r}")
    codes, ks, bounds, flags = [], [], [], []
    for name, kind in zip(dataset.columns, dataset.kinds):
        column = dataset.column(name)
        if name == target:
            result = Discretization(make_binary_target(column), discretize_equal_width(column, 2).boundaries)
            k = 2
        elif kind == "discrete":
            result = _compact_codes(column)
            k = max(int(result.codes.max()) + 1, 2) if column.size else 2
        else:
            result = schemes[scheme](column, bins)
            k = bins
        if result.degenerate:
            logger.warning("Column %r is degenerate after discretization", name)
        codes.append(result.codes)
        ks.append(k)
        bounds.append(result.boundaries)
        flags.append(result.degenerate)
    matrix = np.column_stack(codes) if codes else np.zeros((dataset.n_rows, 0), dtype=np.int64)
    return DiscretizedDataset(dataset.columns, matrix, tuple(ks), tuple(bounds), tuple(flags))


def apply_boundaries(values, boundaries: np.ndarray, k: int) -> np.ndarray:
    """Codes for new values under bins fitted on other data.

    A value gets the bin whose lower edge is the last one at or below it;
    values outside the fitted range fall into the first or last bin.
    """
    values = np.asarray(values, dtype=float).ravel()
    codes = np.searchsorted(np.asarray(boundaries, dtype=float), values, side="right") - 1
    return np.clip(codes, 0, k - 1).astype(np.int64)


def recode(dataset: Dataset, reference: DiscretizedDataset) -> DiscretizedDataset:
    """Discretize `dataset` with the bins of `reference`, matching columns by name."""
    missing = sorted(set(reference.columns) - set(dataset.columns))
    if missing:
        raise ValueError(f"Columns {missing} are absent from the data to recode")
    codes = np.column_stack([
        apply_boundaries(dataset.column(name), bounds, k)
        for name, k, bounds in zip(reference.columns, reference.bins, reference.boundaries)
    ])
    return DiscretizedDataset(reference.columns, codes, reference.bins, reference.boundaries, reference.degenerate)
