import logging
from itertools import combinations
from typing import Dict, Optional, Set, Tuple

from src.data.dataset import Dataset
from src.graph.dag import BackgroundKnowledge, Pdag, SepsetTable, _pair
from src.graph.orientation import apply_background_knowledge, apply_meek_rules, orient_v_structures
from src.stats.correlation import CiTestConfig, correlation_matrix, fisher_z_independent, partial_correlation
from src.utils.errors import InsufficientSamplesError, SingularSubmatrixError

logger = logging.getLogger(__name__)


def learn_skeleton(
    data: Dataset,
    cfg: CiTestConfig,
    bk: BackgroundKnowledge,
) -> Tuple[Pdag, SepsetTable, int]:
    """Stable PC skeleton search with Fisher-z tests on partial correlations.

    Adjacency sets are frozen at the start of each level so the result does
    not depend on the order in which pairs are visited. Pairs that the
    constraints rule out in both directions are dropped up front with an
    empty separating set; required edges are never tested.

    Returns:
        (undirected skeleton, separating sets, number of CI tests run)
    """
    n, p = data.values.shape
    corr = correlation_matrix(data.values, data.columns)
    adjacent: Dict[int, Set[int]] = {v: set(range(p)) - {v} for v in range(p)}
    sepsets = SepsetTable()
    required = {_pair(i, j) for i, j in bk.required_edges}

    for i, j in combinations(range(p), 2):
        if not bk.allows_pair(i, j) and (i, j) not in required:
            adjacent[i].discard(j)
            adjacent[j].discard(i)
            sepsets.record(i, j, ())

    n_tests = 0
    level = 0
    while any(len(adjacent[v]) - 1 >= level for v in range(p)):
        frozen = {v: set(adjacent[v]) for v in range(p)}
        for i, j in combinations(range(p), 2):
            if j not in adjacent[i] or (i, j) in required:
                continue
            separated = False
            for a, b in ((i, j), (j, i)):
                candidates = sorted(frozen[a] - {b})
                if len(candidates) < level:
                    continue
                for conditioning in combinations(candidates, level):
                    n_tests += 1
                    try:
                        r = partial_correlation(corr, i, j, conditioning)
                    except SingularSubmatrixError:
                        logger.debug("Singular submatrix for %d, %d | %s; kept dependent", i, j, conditioning)
                        continue
                    if fisher_z_independent(r, n, level, cfg):
                        adjacent[i].discard(j)
                        adjacent[j].discard(i)
                        sepsets.record(i, j, conditioning)
                        separated = True
                        break
                if separated:
                    break
        level += 1

    edges = frozenset(_pair(i, j) for i in range(p) for j in adjacent[i] if i < j)
    logger.debug("Skeleton with %d edges after %d tests up to level %d", len(edges), n_tests, level - 1)
    return Pdag(data.columns, frozenset(), edges), sepsets, n_tests


def pc_search(
    data: Dataset,
    cfg: Optional[CiTestConfig] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> Tuple[Pdag, int]:
    """PC returning the oriented graph together with the number of CI tests run."""
    cfg = cfg or CiTestConfig()
    bk = bk or BackgroundKnowledge()
    n, p = data.values.shape
    if p < 2:
        raise ValueError("PC needs at least two columns")
    if n <= p + 3:
        raise InsufficientSamplesError(f"PC needs more than {p + 3} rows, got {n}")
    skeleton, sepsets, n_tests = learn_skeleton(data, cfg, bk)
    # constraint orientations go in first so collider orientation cannot override them
    oriented = apply_background_knowledge(skeleton, bk)
    oriented = orient_v_structures(oriented, sepsets)
    oriented = apply_meek_rules(oriented, bk)
    logger.info(
        "PC finished: %d directed, %d undirected edges",
        len(oriented.directed),
        len(oriented.undirected),
    )
    return oriented, n_tests


def pc(
    data: Dataset,
    cfg: Optional[CiTestConfig] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> Pdag:
    """Estimate a partially directed graph with the PC algorithm.

    Args:
        data: Numeric columns, at least two, with more than p + 3 rows
        cfg: Fisher-z settings
        bk: Required / forbidden edges, sink and exogenous nodes

    Returns:
        Pdag whose directed edges respect every constraint in `bk`
    """
    return pc_search(data, cfg, bk)[0]
