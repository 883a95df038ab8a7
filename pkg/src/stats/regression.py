import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.kernel_ridge import KernelRidge
from sklearn.tree import DecisionTreeRegressor

from src.utils.errors import InsufficientSamplesError, RankDeficientError

logger = logging.getLogger(__name__)


class RegressorConfig(BaseModel):
    """Nonlinear regressor used for residual-independence search."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["tree", "kernel_ridge"] = "tree"
    max_depth: int = Field(default=6, ge=1)
    ridge_alpha: float = Field(default=1.0, gt=0)
    # kernel ridge is cubic in the row count; rows beyond this are evenly thinned for the fit
    kernel_max_samples: int = Field(default=2000, ge=10)


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    intercept: np.ndarray
    residuals: np.ndarray


@dataclass(frozen=True)
class RegressionFit:
    fitted: np.ndarray
    residuals: np.ndarray


def _as_matrix(predictors) -> np.ndarray:
    predictors = np.asarray(predictors, dtype=float)
    return predictors.reshape(-1, 1) if predictors.ndim == 1 else predictors


def ols_fit(targets, predictors, fit_intercept: bool = True) -> OlsFit:
    """Least-squares fit of one or more targets on a predictor matrix.

    Args:
        targets: (n,) or (n, m) array
        predictors: (n,) or (n, p) array
        fit_intercept: Add a constant column

    Returns:
        OlsFit with (p,) or (p, m) coefficients and residuals shaped like targets

    Raises:
        RankDeficientError: if the design matrix is not of full column rank
    """
    y = np.asarray(targets, dtype=float)
    X = _as_matrix(predictors)
    if X.shape[0] != y.shape[0]:
        raise ValueError("Targets and predictors differ in row count")
    if X.shape[0] < 2:
        raise InsufficientSamplesError("Regression needs at least 2 rows")
    design = np.column_stack([np.ones(X.shape[0]), X]) if fit_intercept else X
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise RankDeficientError(f"Design matrix of shape {design.shape} is rank deficient")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ beta
    if fit_intercept:
        return OlsFit(beta[1:], np.asarray(beta[0]), residuals)
    return OlsFit(beta, np.zeros(y.shape[1:]), residuals)


def tree_regress(target, predictors, depth: int = 6, seed: int = 0) -> RegressionFit:
    """Piecewise-constant regression-tree fit."""
    y = np.asarray(target, dtype=float).ravel()
    X = _as_matrix(predictors)
    if y.size < 2:
        raise InsufficientSamplesError("Regression needs at least 2 rows")
    tree = DecisionTreeRegressor(max_depth=depth, random_state=seed).fit(X, y)
    fitted = tree.predict(X)
    return RegressionFit(fitted, y - fitted)


def kernel_ridge_regress(target, predictors, cfg: RegressorConfig) -> RegressionFit:
    y = np.asarray(target, dtype=float).ravel()
    X = _as_matrix(predictors)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - X.mean(axis=0)) / scale
    keep = np.arange(y.size)
    if y.size > cfg.kernel_max_samples:
        keep = np.linspace(0, y.size - 1, cfg.kernel_max_samples).astype(int)
    model = KernelRidge(alpha=cfg.ridge_alpha, kernel="rbf").fit(Xs[keep], y[keep])
    fitted = model.predict(Xs)
    return RegressionFit(fitted, y - fitted)


def regress(target, predictors, cfg: Optional[RegressorConfig] = None, seed: int = 0) -> RegressionFit:
    cfg = cfg or RegressorConfig()
    if cfg.kind == "tree":
        return tree_regress(target, predictors, cfg.max_depth, seed)
    return kernel_ridge_regress(target, predictors, cfg)
