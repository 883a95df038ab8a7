import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist, pdist
from scipy.stats import gamma

from src.config.settings import DEFAULT_HSIC_ALPHA, HSIC_BANDWIDTH_POINTS, HSIC_MAX_SAMPLES
from src.utils.errors import DegenerateColumnError, InsufficientSamplesError
from src.utils.rng import generator

logger = logging.getLogger(__name__)

# maximum-entropy approximation constants for the log cosh and x*exp(-x^2/2) contrasts
K1 = 79.047
K2 = 7.4129
GAMMA = 0.37457
GAUSSIAN_ENTROPY = (1 + np.log(2 * np.pi)) / 2

HSIC_MIN_SAMPLES = 20


class HsicConfig(BaseModel):
    """Kernel independence test settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=DEFAULT_HSIC_ALPHA, gt=0, lt=1)
    max_samples: int = Field(default=HSIC_MAX_SAMPLES, ge=HSIC_MIN_SAMPLES)
    bandwidth_points: int = Field(default=HSIC_BANDWIDTH_POINTS, ge=2)
    use_permutation: bool = False
    n_permutations: int = Field(default=200, ge=10)


def _standardize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    sd = x.std()
    if sd == 0:
        raise DegenerateColumnError(message="Cannot standardize a constant column")
    return (x - x.mean()) / sd


def neg_entropy_approx(x) -> float:
    """Maximum-entropy approximation of negentropy for a standardized column.

    Raises:
        DegenerateColumnError: if the column is constant
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0 or x.std() == 0:
        raise DegenerateColumnError(message="Negentropy is undefined for a constant column")
    return float(
        K1 * (np.mean(np.log(np.cosh(x))) - GAMMA) ** 2
        + K2 * np.mean(x * np.exp(-(x ** 2) / 2)) ** 2
    )


def entropy_approx(x) -> float:
    """Differential entropy of a standardized column: Gaussian entropy minus negentropy."""
    return GAUSSIAN_ENTROPY - neg_entropy_approx(x)


def residual_on(xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Residual of the simple least-squares regression of xi on xj."""
    return xi - (np.cov(xi, xj, bias=True)[0, 1] / np.var(xj)) * xj


def mutual_info_difference(xi, xj) -> float:
    """I(xj, r_i|j) - I(xi, r_j|i) approximated through entropies.

    Positive values favour xi -> xj.
    """
    xi_std, xj_std = _standardize(xi), _standardize(xj)
    ri_j = residual_on(xi_std, xj_std)
    rj_i = residual_on(xj_std, xi_std)
    return (entropy_approx(xj_std) + entropy_approx(_standardize(ri_j))) - (
        entropy_approx(xi_std) + entropy_approx(_standardize(rj_i))
    )


def _subsample(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.linspace(0, n - 1, limit).astype(int)


def median_bandwidth(x: np.ndarray, max_points: int = HSIC_BANDWIDTH_POINTS) -> float:
    """Median heuristic: sqrt(0.5 * median of positive squared pairwise distances)."""
    points = x[_subsample(x.shape[0], max_points)]
    sq = pdist(points, "sqeuclidean")
    sq = sq[sq > 0]
    if sq.size == 0:
        raise DegenerateColumnError(message="Kernel bandwidth is undefined for a constant column")
    return float(np.sqrt(0.5 * np.median(sq)))


def _centered_gram(x: np.ndarray, width: float) -> Tuple[np.ndarray, np.ndarray]:
    gram = np.exp(-cdist(x, x, "sqeuclidean") / (2 * width ** 2))
    centered = gram - gram.mean(axis=0) - gram.mean(axis=1)[:, None] + gram.mean()
    return gram, centered


def _prepare_pair(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    if x.shape[0] != y.shape[0]:
        raise ValueError("HSIC inputs must have equal length")
    if x.shape[0] < HSIC_MIN_SAMPLES:
        raise InsufficientSamplesError(f"HSIC needs at least {HSIC_MIN_SAMPLES} rows, got {x.shape[0]}")
    return x, y


def _statistic(x: np.ndarray, y: np.ndarray, cfg: HsicConfig):
    widths = (median_bandwidth(x, cfg.bandwidth_points), median_bandwidth(y, cfg.bandwidth_points))
    keep = _subsample(x.shape[0], cfg.max_samples)
    x, y = x[keep], y[keep]
    K, Kc = _centered_gram(x, widths[0])
    L, Lc = _centered_gram(y, widths[1])
    n = x.shape[0]
    return float(np.sum(Kc * Lc) / n), K, Kc, L, Lc, n


def hsic_statistic(x, y, cfg: Optional[HsicConfig] = None) -> Tuple[float, float]:
    """Biased HSIC estimate with Gaussian kernels and its gamma-approximation threshold.

    Bandwidths use the median heuristic on at most `bandwidth_points` rows;
    the Gram matrices are built on at most `max_samples` evenly spaced rows.

    Args:
        x: First sample, one row per observation
        y: Second sample, same length as x
        cfg: Test settings

    Returns:
        (statistic, threshold); independence is accepted when statistic < threshold

    Raises:
        InsufficientSamplesError: with fewer than 20 rows
    """
    cfg = cfg or HsicConfig()
    x, y = _prepare_pair(x, y)
    stat, K, Kc, L, Lc, n = _statistic(x, y, cfg)

    var = (Kc * Lc / 6) ** 2
    var = (np.sum(var) - np.trace(var)) / n / (n - 1)
    var = var * 72 * (n - 4) * (n - 5) / n / (n - 1) / (n - 2) / (n - 3)

    K = K - np.diag(np.diag(K))
    L = L - np.diag(np.diag(L))
    mu_x = np.sum(K) / n / (n - 1)
    mu_y = np.sum(L) / n / (n - 1)
    mean = (1 + mu_x * mu_y - mu_x - mu_y) / n
    if var <= 0 or mean <= 0:
        logger.debug("Degenerate HSIC null moments (mean=%g, var=%g)", mean, var)
        return stat, float("inf")

    shape = mean ** 2 / var
    scale = var * n / mean
    return stat, float(gamma.ppf(1 - cfg.alpha, shape, scale=scale))


def hsic_permutation_test(x, y, cfg: Optional[HsicConfig] = None, seed: int = 0) -> Tuple[float, float]:
    """HSIC statistic with a permutation p-value.

    Returns:
        (statistic, p_value) where p_value counts permuted statistics at least
        as large as the observed one, with the +1 correction
    """
    cfg = cfg or HsicConfig()
    x, y = _prepare_pair(x, y)
    stat, _, Kc, _, Lc, n = _statistic(x, y, cfg)
    rng = generator(seed)
    exceed = 0
    for _ in range(cfg.n_permutations):
        perm = rng.permutation(n)
        if np.sum(Kc * Lc[np.ix_(perm, perm)]) / n >= stat:
            exceed += 1
    return stat, (exceed + 1) / (cfg.n_permutations + 1)


def hsic_independent(x, y, cfg: Optional[HsicConfig] = None, seed: int = 0) -> bool:
    """Independence decision using the configured HSIC test."""
    cfg = cfg or HsicConfig()
    if cfg.use_permutation:
        _, p_value = hsic_permutation_test(x, y, cfg, seed)
        return p_value > cfg.alpha
    stat, threshold = hsic_statistic(x, y, cfg)
    return stat < threshold
