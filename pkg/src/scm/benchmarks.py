import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from src.config.settings import EIGHT_VAR_CONFIG
from src.scm.model import MechanismSpec, NoiseSpec, ScmSpec
from src.utils.errors import ConfigError
from src.utils.rng import generator

logger = logging.getLogger(__name__)

Structure = Literal["A", "B", "C", "D", "E"]
Form = Literal["linear", "nonlinear"]
NoiseKind = Literal["uniform", "gaussian", "mixed"]

TARGET = "Y"
BENCHMARK_NODES = ("X", "Z", "Y")
CREDIT_TARGET = "rating"

# (parent, child, coefficient) over BENCHMARK_NODES
_STRUCTURES: Dict[str, List[Tuple[str, str, float]]] = {
    "A": [("X", "Y", 1.0), ("Z", "Y", 1.5)],
    "B": [("X", "Z", 1.0), ("Z", "Y", 1.0)],
    "C": [("X", "Z", 1.0), ("X", "Y", 1.0), ("Z", "Y", 1.0)],
    "D": [("Z", "Y", 1.0)],
    "E": [("Z", "X", 1.0), ("Z", "Y", 1.0)],
}


def _noise(kind: str) -> NoiseSpec:
    if kind == "uniform":
        return NoiseSpec(kind="uniform01")
    if kind == "gaussian":
        return NoiseSpec(kind="gaussian", mean=0.0, sd=1.0)
    raise ConfigError(f"Unknown noise kind {kind!r}")


def _build(
    nodes: Tuple[str, ...],
    weighted_edges: List[Tuple[str, str, float]],
    mechanism: str,
    noises: List[NoiseSpec],
) -> ScmSpec:
    index = {name: i for i, name in enumerate(nodes)}
    coefficients: List[Dict[int, float]] = [{} for _ in nodes]
    edges = []
    for parent, child, weight in weighted_edges:
        edges.append((index[parent], index[child]))
        coefficients[index[child]][index[parent]] = float(weight)
    return ScmSpec(
        node_names=list(nodes),
        edges=edges,
        mechanisms=[MechanismSpec(kind=mechanism, coefficients=c) for c in coefficients],
        noises=noises,
    )


def _mechanism(form: str) -> str:
    if form not in ("linear", "nonlinear"):
        raise ConfigError(f"Unknown functional form {form!r}")
    return "linear" if form == "linear" else "quadratic"


def make_benchmark(structure: Structure, form: Form, noise: str = "uniform") -> ScmSpec:
    """Three-variable structure over (X, Z, Y).

    A is the collider X -> Y <- Z with coefficients 1 and 1.5, B the chain
    X -> Z -> Y, C the confounder X -> Z, X -> Y, Z -> Y, D has Z -> Y with X
    isolated and E is the fork Z -> X, Z -> Y. Coefficients other than A's are 1.
    """
    if structure not in _STRUCTURES:
        raise ConfigError(f"Unknown benchmark structure {structure!r}; expected one of A-E")
    return _build(
        BENCHMARK_NODES,
        _STRUCTURES[structure],
        _mechanism(form),
        [_noise(noise) for _ in BENCHMARK_NODES],
    )


def _read_topology(path: Path) -> Dict:
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read benchmark topology {path}: {e}") from e
    for key in ("nodes", "edges", "target"):
        if key not in config:
            raise ConfigError(f"Benchmark topology {path} is missing {key!r}")
    return config


def make_eight_var(
    form: Form,
    noise: NoiseKind,
    seed: int,
    config_path: Optional[Union[str, Path]] = None,
) -> ScmSpec:
    """Eight-variable benchmark read from the shipped topology file.

    Edges with a null weight get one drawn from `weight_range` using `seed`, in
    file order. With `noise="mixed"` the root nodes get Bernoulli(0.5) noise and
    become discrete columns; every other node keeps uniform noise.

    Raises:
        ConfigError: if the file is unreadable or the target is not a sink
            with at least two parents
    """
    config = _read_topology(Path(config_path) if config_path else EIGHT_VAR_CONFIG)
    nodes = tuple(config["nodes"])
    target = config["target"]
    low, high = config.get("weight_range", [0.5, 1.2])
    rng = generator(seed)
    weighted = []
    for edge in config["edges"]:
        weight = edge.get("weight")
        if weight is None:
            weight = float(rng.uniform(low, high))
        weighted.append((edge["from"], edge["to"], weight))

    if any(parent == target for parent, _, _ in weighted):
        raise ConfigError(f"Target {target!r} must be a sink")
    if sum(child == target for _, child, _ in weighted) < 2:
        raise ConfigError(f"Target {target!r} needs at least two parents")

    if noise == "mixed":
        roots = {name for name in nodes} - {child for _, child, _ in weighted}
        noises = [
            NoiseSpec(kind="bernoulli", p=0.5) if name in roots else NoiseSpec(kind="uniform01")
            for name in nodes
        ]
    else:
        noises = [_noise(noise) for _ in nodes]
    return _build(nodes, weighted, _mechanism(form), noises)


def eight_var_target(config_path: Optional[Union[str, Path]] = None) -> str:
    return _read_topology(Path(config_path) if config_path else EIGHT_VAR_CONFIG)["target"]


def make_credit_demo() -> ScmSpec:
    """Synthetic credit-rating model: a binary industry flag and four financial figures drive the rating."""
    nodes = ("industry", "capital", "employees", "liabilities", "sales", CREDIT_TARGET)
    weighted = [
        ("industry", "capital", 0.15),
        ("industry", "employees", 0.15),
        ("industry", "liabilities", 0.15),
        ("industry", "sales", 0.15),
        ("industry", CREDIT_TARGET, 1.5),
        ("capital", "liabilities", 0.8),
        ("capital", "sales", 0.5),
        ("liabilities", "sales", 0.4),
        ("capital", CREDIT_TARGET, 0.4),
        ("employees", CREDIT_TARGET, 0.2),
        ("liabilities", CREDIT_TARGET, 0.3),
        ("sales", CREDIT_TARGET, 0.2),
    ]
    noises = [NoiseSpec(kind="bernoulli", p=0.5)] + [NoiseSpec(kind="uniform01") for _ in nodes[1:]]
    return _build(nodes, weighted, "linear", noises)
