import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
import scipy.linalg as slin
import scipy.optimize as sopt
from pydantic import BaseModel, ConfigDict, Field

from src.data.dataset import Dataset
from src.graph.dag import BackgroundKnowledge, Dag
from src.utils.errors import DegenerateColumnError, NonConvergenceWarning

logger = logging.getLogger(__name__)


class NotearsConfig(BaseModel):
    """Augmented-Lagrangian settings for linear continuous structure learning."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda1: float = Field(default=0.1, ge=0)
    w_threshold: float = Field(default=0.3, ge=0)
    h_tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=100, ge=1)
    rho_init: float = Field(default=1.0, gt=0)
    rho_growth: float = Field(default=10.0, gt=1)
    rho_max: float = Field(default=1e16, gt=0)


@dataclass
class NotearsResult:
    weights: np.ndarray
    raw_weights: np.ndarray
    h: float
    iterations: int
    converged: bool
    removed_edges: List[Tuple[int, int]] = field(default_factory=list)


def acyclicity(W: np.ndarray) -> Tuple[float, np.ndarray]:
    """h(W) = tr(exp(W * W)) - d and its gradient exp(W * W)^T * 2W."""
    E = slin.expm(W * W)
    h = float(np.trace(E) - W.shape[0])
    return h, E.T * W * 2


def _bounds(d: int, bk: BackgroundKnowledge) -> List[Tuple[float, Optional[float]]]:
    bounds = []
    for _ in range(2):
        for i in range(d):
            for j in range(d):
                blocked = i == j or not bk.allows(i, j)
                bounds.append((0, 0) if blocked else (0, None))
    return bounds


def _break_cycles(W: np.ndarray) -> List[Tuple[int, int]]:
    """Zero the weakest edge of each remaining cycle until W is acyclic."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(W.shape[0]))
    graph.add_edges_from(zip(*np.nonzero(W)))
    removed = []
    while True:
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return removed
        i, j = min(cycle, key=lambda e: abs(W[e[0], e[1]]))[:2]
        W[i, j] = 0.0
        graph.remove_edge(i, j)
        removed.append((int(i), int(j)))


def notears_search(
    X: np.ndarray,
    cfg: Optional[NotearsConfig] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> NotearsResult:
    """Minimize 0.5/n ||X - XW||^2 + lambda1 |W|_1 subject to h(W) = 0.

    The weights are split into positive and negative parts so the l1 term is
    smooth, and L-BFGS-B solves each penalized subproblem. Entries the
    constraints disallow are bounded at zero. After the loop the weights are
    thresholded and any remaining cycle is broken at its weakest edge.

    Args:
        X: (n, d) data, standardized internally
        cfg: Optimizer settings
        bk: Forbidden edges, sink and exogenous nodes

    Returns:
        NotearsResult with the final weights and the optimizer state
    """
    cfg = cfg or NotearsConfig()
    bk = bk or BackgroundKnowledge()
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise DegenerateColumnError(column=str(int(np.flatnonzero(sd == 0)[0])))
    X = (X - X.mean(axis=0)) / sd

    def _adj(w: np.ndarray) -> np.ndarray:
        return (w[: d * d] - w[d * d:]).reshape(d, d)

    def _func(w: np.ndarray):
        W = _adj(w)
        R = X - X @ W
        loss = 0.5 / n * (R ** 2).sum()
        g_loss = -1.0 / n * X.T @ R
        h, g_h = acyclicity(W)
        obj = loss + 0.5 * rho * h * h + alpha * h + cfg.lambda1 * w.sum()
        g_smooth = g_loss + (rho * h + alpha) * g_h
        return obj, np.concatenate((g_smooth + cfg.lambda1, -g_smooth + cfg.lambda1), axis=None)

    w_est, rho, alpha, h = np.zeros(2 * d * d), cfg.rho_init, 0.0, np.inf
    bounds = _bounds(d, bk)
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        w_new, h_new = w_est, h
        while rho < cfg.rho_max:
            sol = sopt.minimize(_func, w_est, method="L-BFGS-B", jac=True, bounds=bounds)
            w_new = sol.x
            h_new, _ = acyclicity(_adj(w_new))
            if h_new > 0.25 * h:
                rho *= cfg.rho_growth
            else:
                break
        w_est, h = w_new, h_new
        alpha += rho * h
        logger.debug("NOTEARS iteration %d: h=%.3g rho=%.1g", iterations, h, rho)
        if h <= cfg.h_tol or rho >= cfg.rho_max:
            break

    converged = bool(h <= cfg.h_tol)
    if not converged:
        message = f"NOTEARS stopped after {iterations} iterations with h={h:.3g} above {cfg.h_tol:g}"
        logger.warning(message)
        warnings.warn(message, NonConvergenceWarning, stacklevel=2)

    raw = _adj(w_est)
    W = raw.copy()
    W[np.abs(W) < cfg.w_threshold] = 0.0
    removed = _break_cycles(W)
    if removed:
        logger.info("Removed %d edges to break cycles after thresholding", len(removed))
    return NotearsResult(W, raw, float(h), iterations, converged, removed)


def notears_linear(
    data: Dataset,
    cfg: Optional[NotearsConfig] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> Dag:
    result = notears_search(data.values, cfg, bk)
    edges = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(result.weights)))
    return Dag(data.columns, edges).ensure_acyclic()
