import logging
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.stats import norm

from src.config.settings import DEFAULT_ALPHA
from src.utils.errors import DegenerateColumnError, InsufficientSamplesError, SingularSubmatrixError

logger = logging.getLogger(__name__)

# reciprocal condition number below which a submatrix is treated as singular
_SINGULAR_RCOND = 1e-12


class CiTestConfig(BaseModel):
    """Conditional-independence test settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=DEFAULT_ALPHA, gt=0, lt=1)


def correlation_matrix(data, columns: Optional[Sequence[str]] = None) -> np.ndarray:
    """Pearson correlation matrix of the columns of `data`.

    Args:
        data: (n_rows, n_columns) real array
        columns: Optional labels used in error messages

    Returns:
        Symmetric matrix with unit diagonal

    Raises:
        InsufficientSamplesError: with fewer than 3 rows
        DegenerateColumnError: if a column is constant
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("Expected a two-dimensional array")
    if data.shape[0] < 3:
        raise InsufficientSamplesError(f"Correlation needs at least 3 rows, got {data.shape[0]}")
    constant = np.flatnonzero(data.std(axis=0) == 0)
    if constant.size:
        c = int(constant[0])
        raise DegenerateColumnError(column=columns[c] if columns else str(c))
    corr = np.corrcoef(data, rowvar=False)
    corr = np.atleast_2d((corr + corr.T) / 2)
    np.fill_diagonal(corr, 1.0)
    return corr


def partial_correlation(corr: np.ndarray, i: int, j: int, conditioning: Iterable[int] = ()) -> float:
    """Partial correlation of i and j given a conditioning set, from the inverse of the
    correlation submatrix on {i, j} and the set."""
    conditioning = [k for k in conditioning]
    if not conditioning:
        return float(corr[i, j])
    idx = [i, j] + conditioning
    sub = corr[np.ix_(idx, idx)]
    if 1.0 / np.linalg.cond(sub) < _SINGULAR_RCOND:
        raise SingularSubmatrixError(f"Correlation submatrix on {idx} is singular")
    try:
        precision = np.linalg.inv(sub)
    except np.linalg.LinAlgError as e:
        raise SingularSubmatrixError(f"Correlation submatrix on {idx} is singular") from e
    denom = np.sqrt(precision[0, 0] * precision[1, 1])
    return float(-precision[0, 1] / denom)


def fisher_z_statistic(r: float, n: int, s: int) -> float:
    if n <= s + 3:
        raise InsufficientSamplesError(f"Fisher-z needs n > s + 3 (n={n}, s={s})")
    if abs(r) >= 1:
        return float("inf")
    return float(np.sqrt(n - s - 3) * abs(np.arctanh(r)))


def fisher_z_independent(r: float, n: int, s: int, cfg: Optional[CiTestConfig] = None) -> bool:
    """True when the Fisher-z test cannot reject a zero (partial) correlation at level alpha.

    The statistic is sqrt(n - s - 3) * |atanh(r)|, compared with the two-sided
    normal quantile.
    """
    cfg = cfg or CiTestConfig()
    return fisher_z_statistic(r, n, s) <= norm.ppf(1 - cfg.alpha / 2)
