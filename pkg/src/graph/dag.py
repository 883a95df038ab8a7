import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from src.utils.errors import ConstraintConflictError, CyclicGraphError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _pair(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i < j else (j, i)


def _check_endpoints(edges: Iterable[Edge], n_nodes: int) -> None:
    for i, j in edges:
        if i == j:
            raise ValueError(f"Self-loop on node {i}")
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValueError(f"Edge ({i}, {j}) has an endpoint outside 0..{n_nodes - 1}")


@dataclass(frozen=True)
class Dag:
    """Directed graph over positionally indexed nodes.

    Acyclicity is not enforced at construction so that cyclic candidates can be
    inspected; `topological_order` and `ensure_acyclic` raise on cycles.
    """

    node_names: Tuple[str, ...]
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "node_names", tuple(self.node_names))
        object.__setattr__(self, "edges", frozenset((int(i), int(j)) for i, j in self.edges))
        _check_endpoints(self.edges, len(self.node_names))

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    def index(self, name: str) -> int:
        return self.node_names.index(name)

    def children(self, v: int) -> Set[int]:
        return {j for i, j in self.edges if i == v}

    def out_degree(self, v: int) -> int:
        return sum(1 for i, _ in self.edges if i == v)

    def descendants(self, v: int) -> Set[int]:
        return set(nx.descendants(self.to_networkx(), v))

    def skeleton(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(_pair(i, j) for i, j in self.edges)

    def with_edges(self, extra: Iterable[Edge]) -> "Dag":
        return Dag(self.node_names, self.edges | frozenset(extra))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_edges_from(self.edges)
        return graph

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def ensure_acyclic(self) -> "Dag":
        if not self.is_acyclic():
            cycle = nx.find_cycle(self.to_networkx())
            raise CyclicGraphError(f"Graph contains a directed cycle: {cycle}")
        return self

    def adjacency_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.n_nodes, self.n_nodes), dtype=int)
        for i, j in self.edges:
            matrix[i, j] = 1
        return matrix

    def to_pdag(self) -> "Pdag":
        return Pdag(self.node_names, self.edges, frozenset())


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph; undirected pairs are stored as (min, max)."""

    node_names: Tuple[str, ...]
    directed: FrozenSet[Edge] = field(default_factory=frozenset)
    undirected: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "node_names", tuple(self.node_names))
        object.__setattr__(self, "directed", frozenset((int(i), int(j)) for i, j in self.directed))
        object.__setattr__(self, "undirected", frozenset(_pair(int(i), int(j)) for i, j in self.undirected))
        _check_endpoints(self.directed, len(self.node_names))
        _check_endpoints(self.undirected, len(self.node_names))
        directed_pairs = [_pair(i, j) for i, j in self.directed]
        if len(set(directed_pairs)) != len(directed_pairs):
            raise ValueError("A node pair is directed both ways")
        overlap = set(directed_pairs) & self.undirected
        if overlap:
            raise ValueError(f"Pairs {sorted(overlap)} are both directed and undirected")

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    def is_adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self.directed or (j, i) in self.directed or _pair(i, j) in self.undirected

    def neighbors(self, v: int) -> Set[int]:
        """All nodes adjacent to v through any edge type."""
        found = {j for i, j in self.directed if i == v} | {i for i, j in self.directed if j == v}
        for i, j in self.undirected:
            if i == v:
                found.add(j)
            elif j == v:
                found.add(i)
        return found

    def skeleton(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(_pair(i, j) for i, j in self.directed) | self.undirected

    def is_fully_directed(self) -> bool:
        return not self.undirected

    def to_dag(self) -> Dag:
        if self.undirected:
            raise ValueError("Pdag still has undirected edges")
        return Dag(self.node_names, self.directed)


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Structural constraints supplied before or during discovery."""

    required_edges: FrozenSet[Edge] = field(default_factory=frozenset)
    forbidden_edges: FrozenSet[Edge] = field(default_factory=frozenset)
    sink_nodes: FrozenSet[int] = field(default_factory=frozenset)
    exogenous_nodes: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("required_edges", "forbidden_edges"):
            object.__setattr__(self, name, frozenset((int(i), int(j)) for i, j in getattr(self, name)))
        for name in ("sink_nodes", "exogenous_nodes"):
            object.__setattr__(self, name, frozenset(int(v) for v in getattr(self, name)))
        clash = self.required_edges & self.forbidden_edges
        if clash:
            raise ConstraintConflictError(f"Edges {sorted(clash)} are both required and forbidden")
        leaving = [(i, j) for i, j in self.required_edges if i in self.sink_nodes]
        if leaving:
            raise ConstraintConflictError(f"Required edges {sorted(leaving)} leave a sink node")
        entering = [(i, j) for i, j in self.required_edges if j in self.exogenous_nodes]
        if entering:
            raise ConstraintConflictError(f"Required edges {sorted(entering)} enter an exogenous node")

    def allows(self, i: int, j: int) -> bool:
        """Whether the directed edge i -> j is compatible with the constraints."""
        return (
            (i, j) not in self.forbidden_edges
            and i not in self.sink_nodes
            and j not in self.exogenous_nodes
        )

    def allows_pair(self, i: int, j: int) -> bool:
        return self.allows(i, j) or self.allows(j, i)

    def merge(self, other: "BackgroundKnowledge") -> "BackgroundKnowledge":
        return BackgroundKnowledge(
            required_edges=self.required_edges | other.required_edges,
            forbidden_edges=self.forbidden_edges | other.forbidden_edges,
            sink_nodes=self.sink_nodes | other.sink_nodes,
            exogenous_nodes=self.exogenous_nodes | other.exogenous_nodes,
        )

    def restrict(self, keep: Sequence[int]) -> "BackgroundKnowledge":
        """Re-index onto the sub-graph made of `keep` (old indices, in new order)."""
        position = {old: new for new, old in enumerate(keep)}
        return BackgroundKnowledge(
            required_edges=frozenset(
                (position[i], position[j]) for i, j in self.required_edges if i in position and j in position
            ),
            forbidden_edges=frozenset(
                (position[i], position[j]) for i, j in self.forbidden_edges if i in position and j in position
            ),
            sink_nodes=frozenset(position[v] for v in self.sink_nodes if v in position),
            exogenous_nodes=frozenset(position[v] for v in self.exogenous_nodes if v in position),
        )


class SepsetTable:
    """Conditioning sets that separated each removed pair."""

    def __init__(self):
        self._sets: Dict[FrozenSet[int], FrozenSet[int]] = {}

    def record(self, i: int, j: int, conditioning: Iterable[int]) -> None:
        self._sets[frozenset((i, j))] = frozenset(conditioning)

    def get(self, i: int, j: int) -> Optional[FrozenSet[int]]:
        return self._sets.get(frozenset((i, j)))

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._sets

    def __len__(self) -> int:
        return len(self._sets)

    def items(self):
        return self._sets.items()


def topological_order(dag: Dag) -> List[int]:
    """Return node indices with every parent before its children.

    Ties are broken by index so the order is deterministic.
    """
    try:
        return list(nx.lexicographical_topological_sort(dag.to_networkx()))
    except nx.NetworkXUnfeasible as e:
        raise CyclicGraphError(f"No topological order exists: {e}") from e


def parents(dag: Dag, v: int) -> Set[int]:
    if not 0 <= v < dag.n_nodes:
        raise ValueError(f"Node {v} is not in the graph")
    return {i for i, j in dag.edges if j == v}


def structural_hamming_distance(a: Dag, b: Dag) -> int:
    """Missing or extra adjacencies count one, reversed edges count one."""
    count = 0
    for i, j in combinations(range(a.n_nodes), 2):
        in_a = (i, j) in a.edges, (j, i) in a.edges
        in_b = (i, j) in b.edges, (j, i) in b.edges
        if in_a != in_b:
            count += 1
    return count


def graph_to_json(graph: Union[Dag, Pdag]) -> Dict:
    if isinstance(graph, Dag):
        directed, undirected = graph.edges, frozenset()
    else:
        directed, undirected = graph.directed, graph.undirected
    return {
        "nodes": list(graph.node_names),
        "directed": [list(e) for e in sorted(directed)],
        "undirected": [list(e) for e in sorted(undirected)],
    }


def graph_from_json(payload: Dict) -> Union[Dag, Pdag]:
    """Build a Dag when no undirected edges are present, otherwise a Pdag."""
    nodes = payload["nodes"]
    directed = [tuple(e) for e in payload.get("directed", [])]
    undirected = [tuple(e) for e in payload.get("undirected", [])]
    if undirected:
        return Pdag(tuple(nodes), frozenset(directed), frozenset(undirected))
    return Dag(tuple(nodes), frozenset(directed))


def save_graph(graph: Union[Dag, Pdag], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(graph_to_json(graph), indent=2))


def load_graph(path: Union[str, Path]) -> Union[Dag, Pdag]:
    return graph_from_json(json.loads(Path(path).read_text()))


def adjacency_csv(dag: Dag, path: Union[str, Path]) -> None:
    """Write the adjacency matrix with rows as parents and columns as children."""
    frame = pd.DataFrame(dag.adjacency_matrix(), index=dag.node_names, columns=dag.node_names)
    frame.to_csv(path)
