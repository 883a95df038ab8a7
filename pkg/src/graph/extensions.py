import logging
from typing import List, Tuple

import networkx as nx

from src.graph.dag import Dag, Pdag
from src.utils.errors import CyclicGraphError, NoExtensionError

logger = logging.getLogger(__name__)


def extension_search(pdag: Pdag, cap: int = 10_000) -> Tuple[List[Dag], bool]:
    """Enumerate consistent DAG extensions of a partially directed graph.

    Undirected edges are visited in sorted order and oriented lower -> higher
    first, so the enumeration order is deterministic. A branch is cut as soon
    as an orientation closes a directed cycle or creates a collider whose two
    tails are non-adjacent (a v-structure absent from the input).

    Args:
        pdag: Graph to extend
        cap: Maximum number of extensions returned

    Returns:
        Extensions in enumeration order, at most `cap` of them, and whether
        more existed beyond the cap
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    graph = nx.DiGraph()
    graph.add_nodes_from(range(pdag.n_nodes))
    graph.add_edges_from(pdag.directed)
    if not nx.is_directed_acyclic_graph(graph):
        raise NoExtensionError(f"Directed part is cyclic: {nx.find_cycle(graph)}")
    if pdag.is_fully_directed():
        return [pdag.to_dag()], False

    pending = sorted(pdag.undirected)
    found: List[Dag] = []

    def creates_collider(tail: int, head: int) -> bool:
        return any(
            other != tail and not pdag.is_adjacent(other, tail)
            for other in graph.predecessors(head)
        )

    def extend(position: int) -> bool:
        if position == len(pending):
            found.append(Dag(pdag.node_names, frozenset(graph.edges)))
            return len(found) > cap
        i, j = pending[position]
        for tail, head in ((i, j), (j, i)):
            if nx.has_path(graph, head, tail) or creates_collider(tail, head):
                continue
            graph.add_edge(tail, head)
            stop = extend(position + 1)
            graph.remove_edge(tail, head)
            if stop:
                return True
        return False

    # one extension past the cap tells a full enumeration from a cut one
    truncated = extend(0)
    if not found:
        raise NoExtensionError("Partially directed graph admits no consistent extension")
    if truncated:
        found = found[:cap]
        logger.warning("Extension enumeration truncated at cap=%d", cap)
    for dag in found:
        if not dag.is_acyclic():
            raise CyclicGraphError("Enumerated extension is cyclic")
    return found, truncated


def enumerate_dag_extensions(pdag: Pdag, cap: int = 10_000) -> List[Dag]:
    """Consistent DAG extensions of `pdag`, at most `cap` of them."""
    return extension_search(pdag, cap)[0]
