import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.config.settings import MIN_STRATUM_COVERAGE
from src.data.dataset import DiscretizedDataset
from src.graph.dag import Dag, parents
from src.utils.errors import EmptyCellError, ReverseCausationWarning

logger = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0

# maps a coded table (all columns of the scored data) to one 0/1 label per row
Labeler = Callable[[DiscretizedDataset], np.ndarray]


@dataclass(frozen=True)
class Adjustment:
    """Interventional probability with the strata that supported it.

    `coverage` is the P(Z = z) weight of the strata that have rows at X = x.
    Empty strata are either filled from the classifier (`imputed_strata`) or
    dropped with the remaining weights renormalized.
    """

    value: float
    adjustment_set: Tuple[str, ...]
    coverage: float
    empty_strata: int
    imputed_strata: int = 0

    @property
    def renormalized(self) -> bool:
        return self.empty_strata > self.imputed_strata


def _aligned_labels(data: DiscretizedDataset, labels) -> np.ndarray:
    labels = np.asarray(labels).ravel()
    if labels.size != data.n_rows:
        raise ValueError(f"Got {labels.size} labels for {data.n_rows} rows")
    return labels


def cond_prob(data: DiscretizedDataset, labels, event: int, conditions: Mapping[int, int]) -> float:
    """Empirical P(label = event | column codes = conditions).

    Raises:
        EmptyCellError: if no row matches the conditions
    """
    labels = _aligned_labels(data, labels)
    mask = np.ones(data.n_rows, dtype=bool)
    for column, code in conditions.items():
        mask &= data.codes[:, column] == code
    matched = int(mask.sum())
    if matched == 0:
        raise EmptyCellError(dict(conditions))
    return float(np.count_nonzero(labels[mask] == event) / matched)


class ProbabilityModel:
    """Shared counting state for one (data, labels, graph) triple.

    Stratum indices and interventional probabilities are computed once per
    variable and reused across value pairs. `graph=None` is the no-graph
    setting where do(X=x) is replaced by conditioning on X=x.

    With a `labeler` (the classifier whose predictions are being explained),
    a stratum with no row at X = x is filled by relabelling that stratum's rows
    with X set to x. Without one the stratum is dropped and the weights
    renormalized; `supported` then reports whether enough weight was kept.
    """

    def __init__(
        self,
        data: DiscretizedDataset,
        labels,
        graph: Optional[Dag] = None,
        target: Optional[str] = None,
        labeler: Optional[Labeler] = None,
        min_coverage: float = MIN_STRATUM_COVERAGE,
    ):
        self.data = data
        self.labels = _aligned_labels(data, labels)
        self.graph = graph
        self.target = target
        self.labeler = labeler
        self.min_coverage = min_coverage
        self._strata: Dict[int, Tuple[Tuple[int, ...], Optional[np.ndarray]]] = {}
        self._do: Dict[Tuple[int, int], Adjustment] = {}
        self.warnings: List[str] = []

    def cond(self, event: int, conditions: Mapping[int, int]) -> float:
        return cond_prob(self.data, self.labels, event, conditions)

    def adjustment_set(self, variable: int) -> Tuple[int, ...]:
        """Observed graph parents of a column, as column indices."""
        if self.graph is None:
            return ()
        name = self.data.columns[variable]
        if name not in self.graph.node_names:
            raise ValueError(f"Graph does not cover column {name!r}")
        parent_names = sorted(self.graph.node_names[p] for p in parents(self.graph, self.graph.index(name)))
        observed = tuple(self.data.index(p) for p in parent_names if p in self.data.columns)
        if self.target is not None and self.target in parent_names:
            message = f"Target {self.target!r} is a parent of {name!r}; adjusting on the observed target column"
            if message not in self.warnings:
                self.warnings.append(message)
                logger.warning(message)
                warnings.warn(message, ReverseCausationWarning, stacklevel=3)
        return observed

    def _stratum_ids(self, variable: int) -> Tuple[Tuple[int, ...], Optional[np.ndarray]]:
        if variable not in self._strata:
            z = self.adjustment_set(variable)
            ids = None
            if z:
                _, ids = np.unique(self.data.codes[:, list(z)], axis=0, return_inverse=True)
                ids = ids.ravel()
            self._strata[variable] = (z, ids)
        return self._strata[variable]

    def _classifier_rates(self, variable: int, code: int, ids: np.ndarray, empty: np.ndarray) -> np.ndarray:
        """Positive rate per empty stratum after setting X = code on that stratum's rows."""
        rows = np.flatnonzero(empty[ids])
        codes = self.data.codes[rows].copy()
        codes[:, variable] = code
        counterfactual = DiscretizedDataset(
            self.data.columns, codes, self.data.bins, self.data.boundaries, self.data.degenerate
        )
        predicted = np.asarray(self.labeler(counterfactual)).ravel() == POSITIVE
        positives = np.bincount(ids[rows], weights=predicted, minlength=empty.size)
        sizes = np.bincount(ids[rows], minlength=empty.size)
        return positives[empty] / sizes[empty]

    def do_positive(self, variable: int, code: int) -> Adjustment:
        """P(o | do(X = code)) by backdoor adjustment over the parents of X."""
        key = (variable, code)
        if key in self._do:
            return self._do[key]
        z, ids = self._stratum_ids(variable)
        names = tuple(self.data.columns[c] for c in z)
        if ids is None:
            result = Adjustment(self.cond(POSITIVE, {variable: code}), names, 1.0, 0)
        else:
            at_x = self.data.codes[:, variable] == code
            if not at_x.any():
                raise EmptyCellError({variable: code})
            n_strata = int(ids.max()) + 1
            weights = np.bincount(ids, minlength=n_strata) / self.data.n_rows
            counts = np.bincount(ids[at_x], minlength=n_strata)
            positives = np.bincount(ids[at_x], weights=(self.labels[at_x] == POSITIVE), minlength=n_strata)
            present = counts > 0
            rates = np.zeros(n_strata)
            rates[present] = positives[present] / counts[present]
            covered = float(weights[present].sum())
            empty = int(np.count_nonzero(~present))
            if empty and self.labeler is not None:
                rates[~present] = self._classifier_rates(variable, code, ids, ~present)
                value = float(np.sum(weights * rates))
                imputed = empty
            else:
                value = float(np.sum(weights[present] * rates[present]) / covered)
                imputed = 0
            if empty:
                logger.debug(
                    "do(%s=%d): %d empty strata (%d from the classifier), coverage %.3f",
                    self.data.columns[variable], code, empty, imputed, covered,
                )
            result = Adjustment(value, names, covered, empty, imputed)
        self._do[key] = result
        return result

    def supported(self, variable: int, code: int) -> bool:
        """False when dropped strata left less than `min_coverage` of the weight."""
        z, _ = self._stratum_ids(variable)
        if not z:
            return True
        adjustment = self.do_positive(variable, code)
        return not adjustment.renormalized or adjustment.coverage >= self.min_coverage

    def do(self, variable: int, code: int, event: int = POSITIVE) -> float:
        z, _ = self._stratum_ids(variable)
        if not z:
            return self.cond(event, {variable: code})
        p = self.do_positive(variable, code).value
        return p if event == POSITIVE else 1.0 - p


def do_prob(
    data: DiscretizedDataset,
    labels,
    graph: Optional[Dag],
    variable: int,
    code: int,
    event: int = POSITIVE,
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> float:
    """P(label = event | do(variable = code)); `graph=None` means P(label = event | variable = code).

    Raises:
        EmptyCellError: when every stratum is empty at variable = code
    """
    return ProbabilityModel(data, labels, graph, target, labeler).do(variable, code, event)
