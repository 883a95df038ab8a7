import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.data.dataset import DiscretizedDataset
from src.graph.dag import Dag
from src.scoring.probability import NEGATIVE, POSITIVE, Labeler, ProbabilityModel
from src.utils.errors import EmptyCellError, NoValidPairError, UndefinedScoreError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class ScoreQuery:
    """Variable column index and a code pair with x > x_prime."""

    variable: int
    x: int
    x_prime: int

    def __post_init__(self):
        if not self.x > self.x_prime:
            raise ValueError(f"Expected x > x', got x={self.x}, x'={self.x_prime}")


@dataclass(frozen=True)
class ScoreTriple:
    nec: float
    suf: float
    nesuf: float
    raw_nec: float
    raw_suf: float
    raw_nesuf: float

    @staticmethod
    def from_raw(nec: float, suf: float, nesuf: float) -> "ScoreTriple":
        clip = lambda v: float(min(1.0, max(0.0, v)))
        return ScoreTriple(clip(nec), clip(suf), clip(nesuf), float(nec), float(suf), float(nesuf))

    @property
    def clamped(self) -> Dict[str, bool]:
        return {
            "nec": self.nec != self.raw_nec,
            "suf": self.suf != self.raw_suf,
            "nesuf": self.nesuf != self.raw_nesuf,
        }

    @property
    def any_clamped(self) -> bool:
        return any(self.clamped.values())


@dataclass
class ScoreReport:
    """Scores of every explanatory variable under one graph (or none)."""

    variables: Tuple[str, ...]
    pairs: Dict[str, Dict[Pair, ScoreTriple]]
    max_nesuf: Dict[str, Optional[float]]
    graph: Optional[Dag]
    coverage: Dict[str, Dict[int, float]] = field(default_factory=dict)
    adjustment_sets: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def no_graph(self) -> bool:
        return self.graph is None

    def argmax_pair(self, variable: str) -> Optional[Pair]:
        """First pair attaining the variable's maxNesuf."""
        best = self.max_nesuf.get(variable)
        if best is None:
            return None
        for pair, triple in self.pairs[variable].items():
            if triple.nesuf == best:
                return pair
        return None

    def score_vector(self, variables: Optional[Tuple[str, ...]] = None, missing: float = 0.0) -> np.ndarray:
        """maxNesuf per variable in the given order; variables without a valid pair map to `missing`."""
        names = variables or self.variables
        return np.array([
            self.max_nesuf[v] if self.max_nesuf.get(v) is not None else missing for v in names
        ])


def _triple(model: ProbabilityModel, query: ScoreQuery) -> ScoreTriple:
    v, x, xp = query.variable, query.x, query.x_prime
    for code in (x, xp):
        if not model.supported(v, code):
            coverage = model.do_positive(v, code).coverage
            raise UndefinedScoreError(
                f"do({model.data.columns[v]}={code}) keeps only {coverage:.2f} of the adjustment weight"
            )
    p_o_x = model.cond(POSITIVE, {v: x})
    p_o_xp = model.cond(POSITIVE, {v: xp})
    p_on_x = model.cond(NEGATIVE, {v: x})
    p_on_xp = model.cond(NEGATIVE, {v: xp})
    do_on_xp = model.do(v, xp, NEGATIVE)
    do_on_x = model.do(v, x, NEGATIVE)
    do_o_x = model.do(v, x, POSITIVE)
    if p_o_x == 0:
        raise UndefinedScoreError(f"P(o | {model.data.columns[v]}={x}) is zero; necessity is undefined")
    if p_on_xp == 0:
        raise UndefinedScoreError(f"P(o' | {model.data.columns[v]}={xp}) is zero; sufficiency is undefined")
    nec = (do_on_xp - p_on_x) / p_o_x
    suf = (do_o_x - p_o_xp) / p_on_xp
    nesuf = do_on_xp - do_on_x
    return ScoreTriple.from_raw(nec, suf, nesuf)


def _check_codes(data: DiscretizedDataset, query: ScoreQuery) -> None:
    present = set(data.observed_codes(query.variable))
    for code in (query.x, query.x_prime):
        if code not in present:
            raise EmptyCellError({query.variable: code})


def scores_for_pair(
    query: ScoreQuery,
    data: DiscretizedDataset,
    labels,
    graph: Optional[Dag] = None,
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> ScoreTriple:
    """Necessity, sufficiency and necessity-and-sufficiency for one code pair.

    Nec   = [P(o'|do(x')) - P(o'|x)] / P(o|x)
    Suf   = [P(o|do(x)) - P(o|x')] / P(o'|x')
    Nesuf = P(o'|do(x')) - P(o'|do(x))

    Values are clamped to [0, 1]; the raw values are kept on the triple.

    Raises:
        UndefinedScoreError: when P(o|x) or P(o'|x') is zero, or when an
            adjustment dropped too much of its stratum weight
    """
    _check_codes(data, query)
    return _triple(ProbabilityModel(data, labels, graph, target, labeler), query)


def _variable_pairs(model: ProbabilityModel, variable: int) -> Tuple[Dict[Pair, ScoreTriple], List[str]]:
    codes = model.data.observed_codes(variable)
    name = model.data.columns[variable]
    scored: Dict[Pair, ScoreTriple] = {}
    skipped: List[str] = []
    for xp, x in combinations(codes, 2):
        try:
            scored[(x, xp)] = _triple(model, ScoreQuery(variable, x, xp))
        except (UndefinedScoreError, EmptyCellError) as e:
            skipped.append(f"{name} ({x}, {xp}) skipped: {e}")
    return scored, skipped


def max_nesuf(
    data: DiscretizedDataset,
    labels,
    graph: Optional[Dag],
    variable: int,
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> float:
    """Largest clamped Nesuf over every observed code pair of a variable.

    Raises:
        NoValidPairError: if the variable has fewer than two codes or every pair was skipped
    """
    scored, _ = _variable_pairs(ProbabilityModel(data, labels, graph, target, labeler), variable)
    if not scored:
        raise NoValidPairError(f"No scorable value pair for {data.columns[variable]!r}")
    return max(t.nesuf for t in scored.values())


def explain(
    data: DiscretizedDataset,
    labels,
    graph: Optional[Dag],
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> ScoreReport:
    """Score every explanatory column (all columns except `target`) under one graph.

    Skipped pairs and variables without any valid pair are recorded in the
    report diagnostics; empty cells never abort the report. Pass the
    classifier as `labeler` so strata without rows at X = x are filled from
    it instead of dropped.
    """
    model = ProbabilityModel(data, labels, graph, target, labeler)
    variables = tuple(c for c in data.columns if c != target)
    report = ScoreReport(variables, {}, {}, graph)
    for name in variables:
        v = data.index(name)
        scored, skipped = _variable_pairs(model, v)
        report.pairs[name] = scored
        report.diagnostics.extend(skipped)
        if scored:
            report.max_nesuf[name] = max(t.nesuf for t in scored.values())
        else:
            report.max_nesuf[name] = None
            report.diagnostics.append(f"{name}: no valid value pair")
        report.adjustment_sets[name] = tuple(data.columns[c] for c in model.adjustment_set(v))
        adjustments = {code: model.do_positive(v, code) for code in data.observed_codes(v)}
        report.coverage[name] = {code: a.coverage for code, a in adjustments.items()}
        filled = sum(a.imputed_strata for a in adjustments.values())
        if filled:
            report.diagnostics.append(f"{name}: {filled} empty strata filled from the classifier")
    report.diagnostics.extend(model.warnings)
    logger.info(
        "Scored %d variables (%s)",
        len(variables),
        "no graph" if graph is None else f"{len(graph.edges)} edges",
    )
    return report


def explain_output(
    data: DiscretizedDataset,
    labels,
    output,
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> List[ScoreReport]:
    """One report per graph of a DiscoveryOutput; a single no-graph report for the no-graph mode."""
    if output.no_graph:
        return [explain(data, labels, None, target)]
    return [explain(data, labels, dag, target, labeler) for dag in output.dags]
