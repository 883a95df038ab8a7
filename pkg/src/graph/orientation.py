"""Edge orientation for partially directed graphs.

Orientation is done on a small mutable working copy (`_Working`) and frozen
back into a `Pdag` at the end, so callers only ever see immutable graphs.
"""

import logging
import warnings
from itertools import combinations
from typing import List, Set, Tuple

from src.graph.dag import BackgroundKnowledge, Pdag, SepsetTable, _pair
from src.utils.errors import ConflictingOrientationWarning, ConstraintConflictError

logger = logging.getLogger(__name__)


class _Working:
    def __init__(self, pdag: Pdag):
        self.names = pdag.node_names
        self.directed: Set[Tuple[int, int]] = set(pdag.directed)
        self.undirected: Set[Tuple[int, int]] = set(pdag.undirected)

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self.directed or (j, i) in self.directed or _pair(i, j) in self.undirected

    def is_undirected(self, i: int, j: int) -> bool:
        return _pair(i, j) in self.undirected

    def undirected_neighbors(self, v: int) -> List[int]:
        return sorted({j if i == v else i for i, j in self.undirected if v in (i, j)})

    def parents(self, v: int) -> List[int]:
        return sorted(i for i, j in self.directed if j == v)

    def children(self, v: int) -> List[int]:
        return sorted(j for i, j in self.directed if i == v)

    def orient(self, i: int, j: int) -> None:
        self.undirected.discard(_pair(i, j))
        self.directed.add((i, j))

    def freeze(self) -> Pdag:
        return Pdag(self.names, frozenset(self.directed), frozenset(self.undirected))


def orient_v_structures(skeleton: Pdag, sepsets: SepsetTable) -> Pdag:
    """Orient every unshielded collider X -> Z <- Y with Z outside sepset(X, Y).

    Directed edges already present (including ones set by an earlier triple)
    are never overwritten; a contradicting triple raises a
    ConflictingOrientationWarning and the earlier orientation is kept.

    Args:
        skeleton: Graph whose undirected edges are candidates for orientation
        sepsets: Separating sets recorded during skeleton search

    Returns:
        Pdag with the colliders oriented
    """
    work = _Working(skeleton)
    conflicts = []
    for z in range(len(work.names)):
        neighbors = sorted(skeleton.neighbors(z))
        for x, y in combinations(neighbors, 2):
            if skeleton.is_adjacent(x, y):
                continue
            separating = sepsets.get(x, y)
            if separating is not None and z in separating:
                continue
            for tail in (x, y):
                if (tail, z) in work.directed:
                    continue
                if (z, tail) in work.directed:
                    conflicts.append((tail, z))
                    continue
                work.orient(tail, z)
    if conflicts:
        message = f"Conflicting collider orientations kept as first oriented: {conflicts}"
        logger.warning(message)
        warnings.warn(message, ConflictingOrientationWarning, stacklevel=2)
    return work.freeze()


def _apply_knowledge(work: _Working, bk: BackgroundKnowledge) -> None:
    for i, j in sorted(bk.required_edges):
        if (j, i) in work.directed:
            raise ConstraintConflictError(f"Required edge {i}->{j} is oriented the other way")
        if not work.adjacent(i, j):
            raise ConstraintConflictError(f"Required edge {i}->{j} is absent from the skeleton")
        work.orient(i, j)
    for i, j in sorted(bk.forbidden_edges):
        if (i, j) in work.directed:
            raise ConstraintConflictError(f"Forbidden edge {i}->{j} is present")
        if work.is_undirected(i, j):
            if (j, i) in bk.forbidden_edges:
                raise ConstraintConflictError(f"Both directions of {i}-{j} are forbidden")
            work.orient(j, i)
    for s in sorted(bk.sink_nodes):
        if work.children(s):
            raise ConstraintConflictError(f"Sink node {s} has outgoing edges to {work.children(s)}")
        for v in work.undirected_neighbors(s):
            work.orient(v, s)
    for e in sorted(bk.exogenous_nodes):
        if work.parents(e):
            raise ConstraintConflictError(f"Exogenous node {e} has incoming edges from {work.parents(e)}")
        for v in work.undirected_neighbors(e):
            if v in bk.sink_nodes:
                continue
            work.orient(e, v)


def _rule1(work: _Working) -> bool:
    """a -> b - c, a and c non-adjacent: orient b -> c."""
    changed = False
    for a, b in sorted(work.directed):
        for c in work.undirected_neighbors(b):
            if c != a and not work.adjacent(a, c):
                work.orient(b, c)
                changed = True
    return changed


def _rule2(work: _Working) -> bool:
    """a -> b -> c with a - c: orient a -> c."""
    changed = False
    for a, c in sorted(work.undirected):
        for tail, head in ((a, c), (c, a)):
            if not work.is_undirected(tail, head):
                break
            if any((b, head) in work.directed for b in work.children(tail)):
                work.orient(tail, head)
                changed = True
    return changed


def _rule3(work: _Working) -> bool:
    """a - b -> d, a - c -> d, a - d, b and c non-adjacent: orient a -> d."""
    changed = False
    for a, d in sorted(work.undirected):
        for tail, head in ((a, d), (d, a)):
            if not work.is_undirected(tail, head):
                break
            candidates = [b for b in work.undirected_neighbors(tail) if (b, head) in work.directed]
            if any(not work.adjacent(b, c) for b, c in combinations(candidates, 2)):
                work.orient(tail, head)
                changed = True
    return changed


def _rule4(work: _Working) -> bool:
    """a - b, a - d, d -> c -> b, a adjacent to c, b and d non-adjacent: orient a -> b."""
    changed = False
    for a, b in sorted(work.undirected):
        for tail, head in ((a, b), (b, a)):
            if not work.is_undirected(tail, head):
                break
            for c in work.parents(head):
                if c == tail or not work.adjacent(tail, c):
                    continue
                if any(
                    d != head and work.is_undirected(tail, d) and not work.adjacent(d, head)
                    for d in work.parents(c)
                ):
                    work.orient(tail, head)
                    changed = True
                    break
    return changed


def apply_background_knowledge(pdag: Pdag, bk: BackgroundKnowledge) -> Pdag:
    """Orient the edges fixed by the constraints, without propagating them."""
    work = _Working(pdag)
    _apply_knowledge(work, bk)
    return work.freeze()


def apply_meek_rules(pdag: Pdag, bk: BackgroundKnowledge | None = None) -> Pdag:
    """Apply background knowledge, then Meek rules R1-R4 to a fixed point.

    Args:
        pdag: Graph without directed cycles among its directed edges
        bk: Constraints applied before the rules; every undirected edge at a
            sink is oriented into the sink, every one at an exogenous node out of it

    Returns:
        Maximally oriented Pdag
    """
    work = _Working(pdag)
    if bk is not None:
        _apply_knowledge(work, bk)
    changed = True
    while changed:
        changed = _rule1(work)
        changed = _rule2(work) or changed
        changed = _rule3(work) or changed
        changed = _rule4(work) or changed
    return work.freeze()
