import logging
from typing import List, Optional, Set

import numpy as np

from src.data.dataset import Dataset
from src.graph.dag import BackgroundKnowledge, Dag
from src.stats.independence import HsicConfig, hsic_independent, hsic_statistic
from src.stats.regression import RegressorConfig, regress

logger = logging.getLogger(__name__)


def _sink_candidates(remaining: List[int], bk: BackgroundKnowledge) -> List[int]:
    candidates = [v for v in remaining if v in bk.sink_nodes] or list(remaining)
    # exogenous nodes come first in the order, so they are identified last
    non_exogenous = [v for v in candidates if v not in bk.exogenous_nodes]
    return non_exogenous or candidates


def resit_order(
    data: Dataset,
    bk: Optional[BackgroundKnowledge] = None,
    regressor: Optional[RegressorConfig] = None,
    hsic: Optional[HsicConfig] = None,
    seed: int = 0,
) -> List[int]:
    """Causal order found by peeling off sinks.

    At each step every remaining variable is regressed on the others and the
    one whose residual has the smallest HSIC with its predictors is taken as
    the current sink.
    """
    bk = bk or BackgroundKnowledge()
    X = np.asarray(data.values, dtype=float)
    remaining = list(range(X.shape[1]))
    reversed_order: List[int] = []
    while len(remaining) > 1:
        best, best_stat = None, np.inf
        for k in _sink_candidates(remaining, bk):
            others = [v for v in remaining if v != k]
            fit = regress(X[:, k], X[:, others], regressor, seed)
            stat, _ = hsic_statistic(fit.residuals, X[:, others], hsic)
            if stat < best_stat:
                best, best_stat = k, stat
        reversed_order.append(best)
        remaining.remove(best)
        logger.debug("RESIT sink %s (HSIC %.4g)", data.columns[best], best_stat)
    reversed_order.extend(remaining)
    return reversed_order[::-1]


def resit(
    data: Dataset,
    bk: Optional[BackgroundKnowledge] = None,
    regressor: Optional[RegressorConfig] = None,
    hsic: Optional[HsicConfig] = None,
    seed: int = 0,
) -> Dag:
    """Regression with subsequent independence test for additive-noise models.

    Phase one fixes a causal order. Phase two starts every node with all its
    allowed predecessors as parents and drops a parent when the residual of
    the regression on the remaining parents stays independent of them; with
    no remaining parents the node itself is tested against the dropped one.
    Required edges are never dropped.

    Args:
        data: Numeric columns
        bk: Sink nodes are identified first, exogenous nodes last
        regressor: Nonlinear regressor settings
        hsic: Independence test settings
        seed: Seed for the regressor and permutation tests

    Returns:
        Acyclic graph consistent with the causal order
    """
    bk = bk or BackgroundKnowledge()
    if len(data.columns) < 2:
        return Dag(data.columns, frozenset())
    X = np.asarray(data.values, dtype=float)
    order = resit_order(data, bk, regressor, hsic, seed)
    edges = set()
    for position, k in enumerate(order):
        parents: Set[int] = {u for u in order[:position] if bk.allows(u, k)}
        for l in sorted(parents):
            if (l, k) in bk.required_edges:
                continue
            rest = sorted(parents - {l})
            if rest:
                fit = regress(X[:, k], X[:, rest], regressor, seed)
                independent = hsic_independent(fit.residuals, X[:, rest], hsic, seed)
            else:
                independent = hsic_independent(X[:, k], X[:, l], hsic, seed)
            if independent:
                parents.discard(l)
        edges.update((u, k) for u in parents)
    logger.info("RESIT order %s, %d edges", [data.columns[v] for v in order], len(edges))
    return Dag(data.columns, frozenset(edges)).ensure_acyclic()
