import logging
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.data.dataset import Dataset
from src.graph.dag import Dag, parents, topological_order
from src.utils.rng import split_generators

logger = logging.getLogger(__name__)

DoAssignment = Mapping[int, float]


class NoiseSpec(BaseModel):
    """Distribution of one exogenous noise term."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["uniform01", "gaussian", "bernoulli"] = "uniform01"
    mean: float = 0.0
    sd: float = Field(default=1.0, gt=0)
    p: float = Field(default=0.5, ge=0, le=1)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform01":
            return rng.uniform(0.0, 1.0, size=n)
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.sd, size=n)
        return rng.binomial(1, self.p, size=n).astype(float)


class MechanismSpec(BaseModel):
    """Additive-noise structural function: sum of coef * parent (linear) or coef * parent**2 (quadratic)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["linear", "quadratic"] = "linear"
    coefficients: Dict[int, float] = Field(default_factory=dict)

    def evaluate(self, values: np.ndarray, n: int) -> np.ndarray:
        out = np.zeros(n)
        for parent, coef in sorted(self.coefficients.items()):
            column = values[:, parent]
            out += coef * (column if self.kind == "linear" else column ** 2)
        return out


class ScmSpec(BaseModel):
    """Structural causal model over positionally indexed nodes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    node_names: List[str]
    edges: List[Tuple[int, int]] = Field(default_factory=list)
    mechanisms: List[MechanismSpec]
    noises: List[NoiseSpec]

    @model_validator(mode="after")
    def _check_structure(self) -> "ScmSpec":
        n = len(self.node_names)
        if len(self.mechanisms) != n or len(self.noises) != n:
            raise ValueError("One mechanism and one noise per node are required")
        dag = self.dag
        for v, mechanism in enumerate(self.mechanisms):
            expected = parents(dag, v)
            if set(mechanism.coefficients) != expected:
                raise ValueError(
                    f"Node {self.node_names[v]!r} has coefficients for {sorted(mechanism.coefficients)}"
                    f" but parents {sorted(expected)}"
                )
        return self

    @property
    def dag(self) -> Dag:
        return Dag(tuple(self.node_names), frozenset(self.edges))

    def index(self, name: str) -> int:
        return self.node_names.index(name)

    def coefficient(self, parent: str, child: str) -> float:
        return self.mechanisms[self.index(child)].coefficients[self.index(parent)]

    def column_kinds(self) -> Tuple[str, ...]:
        dag = self.dag
        return tuple(
            "discrete" if noise.kind == "bernoulli" and not parents(dag, v) else "continuous"
            for v, noise in enumerate(self.noises)
        )


def _generate(spec: ScmSpec, n: int, seed: int, do: Optional[DoAssignment]) -> Dataset:
    if n < 1:
        raise ValueError("Sample count must be at least 1")
    do = dict(do or {})
    for v in do:
        if not 0 <= v < len(spec.node_names):
            raise ValueError(f"Intervened node {v} is not in the model")
    order = topological_order(spec.dag)
    # every node draws its noise from its own stream, intervened or not
    rngs = split_generators(seed, len(spec.node_names))
    noise = [spec.noises[v].draw(rngs[v], n) for v in range(len(spec.node_names))]
    values = np.zeros((n, len(spec.node_names)))
    for v in order:
        if v in do:
            values[:, v] = float(do[v])
        else:
            values[:, v] = spec.mechanisms[v].evaluate(values, n) + noise[v]
    return Dataset(tuple(spec.node_names), values, spec.column_kinds())


def sample(spec: ScmSpec, n: int, seed: int) -> Dataset:
    """Draw n observational rows; identical output for identical (spec, n, seed)."""
    return _generate(spec, n, seed, None)


def sample_do(spec: ScmSpec, do: DoAssignment, n: int, seed: int) -> Dataset:
    """Draw n rows with the assigned nodes held at constants and their mechanisms severed."""
    return _generate(spec, n, seed, do)


def scm_to_json(spec: ScmSpec) -> str:
    return spec.model_dump_json(indent=2)


def scm_from_json(payload: Union[str, Dict]) -> ScmSpec:
    if isinstance(payload, str):
        return ScmSpec.model_validate_json(payload)
    return ScmSpec.model_validate(payload)


def load_scm(path: Union[str, Path]) -> ScmSpec:
    return scm_from_json(Path(path).read_text())


def save_scm(spec: ScmSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(scm_to_json(spec))
