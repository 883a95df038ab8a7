import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.data.dataset import Dataset
from src.graph.dag import BackgroundKnowledge, Dag
from src.stats.independence import mutual_info_difference, residual_on
from src.stats.regression import ols_fit
from src.utils.errors import DegenerateColumnError

logger = logging.getLogger(__name__)

DEFAULT_PRUNE_THRESHOLD = 0.05


@dataclass(frozen=True)
class LingamResult:
    order: List[int]
    weights: np.ndarray
    dag: Dag


def _standardized(values: np.ndarray, columns) -> np.ndarray:
    sd = values.std(axis=0)
    constant = np.flatnonzero(sd == 0)
    if constant.size:
        raise DegenerateColumnError(column=columns[int(constant[0])])
    return (values - values.mean(axis=0)) / sd


def _candidates(remaining: List[int], bk: BackgroundKnowledge) -> List[int]:
    """Nodes allowed to come next in the order under the constraints."""
    candidates = list(remaining)
    exogenous = [v for v in candidates if v in bk.exogenous_nodes]
    if exogenous:
        candidates = exogenous
    non_sink = [v for v in candidates if v not in bk.sink_nodes]
    if non_sink:
        candidates = non_sink
    blocked = {j for i, j in bk.required_edges if i in remaining and i != j}
    unblocked = [v for v in candidates if v not in blocked]
    if unblocked:
        candidates = unblocked
    return candidates


def _search_causal_order(X: np.ndarray, remaining: List[int], candidates: List[int]) -> int:
    if len(candidates) == 1:
        return candidates[0]
    scores = []
    for i in candidates:
        score = 0.0
        for j in remaining:
            if i == j:
                continue
            try:
                score += min(0.0, mutual_info_difference(X[:, i], X[:, j])) ** 2
            except DegenerateColumnError:
                logger.debug("Skipping degenerate residual pair (%d, %d)", i, j)
        scores.append(score)
    return candidates[int(np.argmin(scores))]


def lingam_causal_order(data: Dataset, bk: Optional[BackgroundKnowledge] = None) -> List[int]:
    """Causal order by repeatedly picking the variable most independent of its pairwise residuals.

    Exogenous nodes are placed first, sink nodes last, and the tail of a
    required edge always precedes its head.
    """
    bk = bk or BackgroundKnowledge()
    X = _standardized(np.array(data.values, dtype=float), data.columns)
    remaining = list(range(X.shape[1]))
    order: List[int] = []
    while remaining:
        m = _search_causal_order(X, remaining, _candidates(remaining, bk))
        for i in remaining:
            if i != m:
                X[:, i] = residual_on(X[:, i], X[:, m])
        order.append(m)
        remaining.remove(m)
    return order


def direct_lingam_fit(
    data: Dataset,
    bk: Optional[BackgroundKnowledge] = None,
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
) -> LingamResult:
    """DirectLiNGAM with least-squares edge weights on standardized data.

    Each variable is regressed on its predecessors in the causal order;
    coefficients below `prune_threshold` in absolute value are dropped unless
    the edge is required.

    Raises:
        RankDeficientError: if a predecessor set is collinear
    """
    bk = bk or BackgroundKnowledge()
    if len(data.columns) < 2:
        raise ValueError("DirectLiNGAM needs at least two columns")
    order = lingam_causal_order(data, bk)
    Xs = _standardized(np.asarray(data.values, dtype=float), data.columns)
    p = Xs.shape[1]
    weights = np.zeros((p, p))
    edges = set()
    for k, v in enumerate(order):
        predecessors = [u for u in order[:k] if bk.allows(u, v)]
        if not predecessors:
            continue
        fit = ols_fit(Xs[:, v], Xs[:, predecessors])
        for u, b in zip(predecessors, np.atleast_1d(fit.coefficients)):
            weights[u, v] = b
            if abs(b) >= prune_threshold or (u, v) in bk.required_edges:
                edges.add((u, v))
    dag = Dag(data.columns, frozenset(edges)).ensure_acyclic()
    logger.info("DirectLiNGAM order %s, %d edges", [data.columns[v] for v in order], len(edges))
    return LingamResult(order, weights, dag)


def direct_lingam(
    data: Dataset,
    bk: Optional[BackgroundKnowledge] = None,
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
) -> Dag:
    return direct_lingam_fit(data, bk, prune_threshold).dag
