import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config.settings import DEFAULT_EXTENSION_CAP
from src.data.dataset import Dataset
from src.discovery.lingam import DEFAULT_PRUNE_THRESHOLD, direct_lingam_fit
from src.discovery.notears import NotearsConfig, notears_search
from src.discovery.pc import pc_search
from src.discovery.resit import resit
from src.graph.dag import BackgroundKnowledge, Dag, Pdag
from src.graph.extensions import extension_search
from src.stats.correlation import CiTestConfig
from src.stats.independence import HsicConfig
from src.stats.regression import RegressorConfig
from src.utils.errors import ConfigError, ConstraintConflictError, UnsupportedModeForMethodError

logger = logging.getLogger(__name__)


class Method(str, Enum):
    PC = "pc"
    LINGAM = "lingam"
    RESIT = "resit"
    NOTEARS = "notears"


class PriorMode(str, Enum):
    """Prior structural knowledge about the target.

    MODE_A: every explanatory variable is a direct parent of the target.
    MODE_B: the target is a sink.
    NO_GRAPH: no graph at all; scoring conditions instead of intervening.
    """

    MODE0 = "0"
    MODE_A = "a"
    MODE_B = "b"
    NO_GRAPH = "nograph"


# methods that cannot take the target-is-sink constraint
SINK_UNSUPPORTED = frozenset({Method.RESIT, Method.NOTEARS})


class DiscoveryConfig(BaseModel):
    """Settings shared by every discovery method."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    ci: CiTestConfig = Field(default_factory=CiTestConfig)
    hsic: HsicConfig = Field(default_factory=HsicConfig)
    regressor: RegressorConfig = Field(default_factory=RegressorConfig)
    notears: NotearsConfig = Field(default_factory=NotearsConfig)
    prune_threshold: float = Field(default=DEFAULT_PRUNE_THRESHOLD, ge=0)
    extension_cap: int = Field(default=DEFAULT_EXTENSION_CAP, ge=1)
    seed: int = 0


@dataclass(frozen=True)
class DiscoveryOutput:
    """Result of one discovery run.

    `dags` holds the single estimated graph, every enumerated extension for
    PC, or nothing for the no-graph mode.
    """

    method: Method
    mode: PriorMode
    dags: Tuple[Dag, ...] = ()
    pdag: Optional[Pdag] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def no_graph(self) -> bool:
        return self.mode == PriorMode.NO_GRAPH

    @property
    def dag(self) -> Dag:
        if len(self.dags) != 1:
            raise ValueError(f"Output holds {len(self.dags)} graphs, not one")
        return self.dags[0]


def _run_method(
    method: Method,
    data: Dataset,
    bk: BackgroundKnowledge,
    config: DiscoveryConfig,
) -> Tuple[Tuple[Dag, ...], Optional[Pdag], Dict[str, Any]]:
    if len(data.columns) < 2:
        empty = Dag(data.columns, frozenset())
        return (empty,), (empty.to_pdag() if method == Method.PC else None), {}
    if method == Method.PC:
        pdag, n_tests = pc_search(data, config.ci, bk)
        extensions, truncated = extension_search(pdag, config.extension_cap)
        return tuple(extensions), pdag, {
            "ci_tests": n_tests,
            "extensions": len(extensions),
            "truncated": truncated,
        }
    if method == Method.LINGAM:
        result = direct_lingam_fit(data, bk, config.prune_threshold)
        return (result.dag,), None, {"order": [data.columns[v] for v in result.order]}
    if method == Method.RESIT:
        return (resit(data, bk, config.regressor, config.hsic, config.seed),), None, {}
    result = notears_search(data.values, config.notears, bk)
    edges = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(result.weights)))
    dag = Dag(data.columns, edges).ensure_acyclic()
    return (dag,), None, {
        "iterations": result.iterations,
        "h": result.h,
        "converged": result.converged,
        "removed_edges": result.removed_edges,
    }


def _lift(dag: Dag, keep: Sequence[int], names: Tuple[str, ...], target: int) -> Dag:
    lifted = Dag(names, frozenset((keep[i], keep[j]) for i, j in dag.edges))
    return lifted.with_edges((x, target) for x in keep)


def _check_mode(output: DiscoveryOutput, target: int) -> None:
    for dag in output.dags:
        dag.ensure_acyclic()
        if output.mode == PriorMode.MODE_A:
            missing = [x for x in range(dag.n_nodes) if x != target and (x, target) not in dag.edges]
            if missing:
                raise ConstraintConflictError(f"Explanatory nodes {missing} are not parents of the target")
        if output.mode == PriorMode.MODE_B and dag.out_degree(target):
            raise ConstraintConflictError("Target has outgoing edges under the sink constraint")


def discover_with_prior(
    method: Method,
    mode: PriorMode,
    data: Dataset,
    target: int,
    config: Optional[DiscoveryConfig] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> DiscoveryOutput:
    """Run a discovery method under a prior-information mode.

    MODE_A discovers on the explanatory columns alone and then adds an edge
    from each of them into the target. MODE_B constrains the target to be a
    sink. MODE0 runs unconstrained apart from `bk`. NO_GRAPH returns an empty
    output so scoring falls back to plain conditionals.

    Args:
        method: Discovery algorithm
        mode: Prior-information mode
        data: Every column, the target included
        target: Column index of the target
        config: Method settings
        bk: Extra constraints in the column indexing of `data`

    Returns:
        DiscoveryOutput whose graphs are acyclic and obey the mode

    Raises:
        UnsupportedModeForMethodError: MODE_B with RESIT or NOTEARS
        ConfigError: if the target index is out of range
    """
    method, mode = Method(method), PriorMode(mode)
    config = config or DiscoveryConfig()
    bk = bk or BackgroundKnowledge()
    if not 0 <= target < len(data.columns):
        raise ConfigError(f"Target index {target} is out of range for {len(data.columns)} columns")
    if mode == PriorMode.NO_GRAPH:
        return DiscoveryOutput(method, mode)
    if mode == PriorMode.MODE_B and method in SINK_UNSUPPORTED:
        raise UnsupportedModeForMethodError(f"{method.value} cannot treat the target as a sink")

    if mode == PriorMode.MODE_A:
        keep = [v for v in range(len(data.columns)) if v != target]
        sub = data.select([data.columns[v] for v in keep])
        dags, pdag, diagnostics = _run_method(method, sub, bk.restrict(keep), config)
        dags = tuple(_lift(d, keep, data.columns, target) for d in dags)
        if pdag is not None:
            directed = {(keep[i], keep[j]) for i, j in pdag.directed} | {(x, target) for x in keep}
            undirected = {(keep[i], keep[j]) for i, j in pdag.undirected}
            pdag = Pdag(data.columns, frozenset(directed), frozenset(undirected))
    else:
        if mode == PriorMode.MODE_B:
            bk = bk.merge(BackgroundKnowledge(sink_nodes=frozenset({target})))
        dags, pdag, diagnostics = _run_method(method, data, bk, config)

    output = DiscoveryOutput(method, mode, dags, pdag, diagnostics)
    _check_mode(output, target)
    logger.info("%s under mode %s produced %d graph(s)", method.value, mode.value, len(dags))
    return output
