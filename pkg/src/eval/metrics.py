import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from src.data.dataset import DiscretizedDataset
from src.graph.dag import Dag
from src.scoring.lewis import ScoreReport, explain
from src.scoring.probability import Labeler
from src.utils.errors import ConstantVectorError, NoExtensionError, ShapeMismatchError

logger = logging.getLogger(__name__)


def mae_bar(true_scores, est_scores) -> float:
    """Mean over variables of the per-variable mean absolute error across trials.

    Args:
        true_scores: (n_trials, n_variables) or (n_variables,) array
        est_scores: Same shape as true_scores

    Raises:
        ShapeMismatchError: if the shapes differ
    """
    t = np.atleast_2d(np.asarray(true_scores, dtype=float))
    e = np.atleast_2d(np.asarray(est_scores, dtype=float))
    if t.shape != e.shape:
        raise ShapeMismatchError(f"Score arrays of shapes {t.shape} and {e.shape}")
    return float(np.mean(np.mean(np.abs(t - e), axis=0)))


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties.

    Without ties the 1 - 6 sum(d^2) / (n (n^2 - 1)) form is used; with ties
    the Pearson correlation of the rank vectors.

    Raises:
        ShapeMismatchError: on unequal lengths or fewer than two entries
        ConstantVectorError: if either vector is constant
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size < 2:
        raise ShapeMismatchError(f"Need two vectors of equal length >= 2, got {a.size} and {b.size}")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ConstantVectorError("Rank correlation is undefined for a constant vector")
    ra, rb = rankdata(a), rankdata(b)
    n = a.size
    if np.array_equal(ra, rb):
        return 1.0
    if np.array_equal(ra, n + 1 - rb):
        return -1.0
    if np.unique(ra).size == n and np.unique(rb).size == n:
        return float(1 - 6 * np.sum((ra - rb) ** 2) / (n * (n ** 2 - 1)))
    return float(np.clip(np.corrcoef(ra, rb)[0, 1], -1.0, 1.0))


@dataclass(frozen=True)
class ExtensionSelection:
    max_report: ScoreReport
    min_report: ScoreReport
    max_spr: Optional[float]
    min_spr: Optional[float]
    n_extensions: int


def select_report_minmax(
    reports: Sequence[ScoreReport],
    true_scores,
    variables: Optional[Sequence[str]] = None,
) -> ExtensionSelection:
    """Pick the extension reports with the highest and lowest SPR against the true scores.

    Extensions whose SPR is undefined are passed over; if none is defined the
    first report is returned for both.

    Raises:
        NoExtensionError: if `reports` is empty
    """
    if not reports:
        raise NoExtensionError("No extension to select from")
    sprs = []
    for report in reports:
        try:
            sprs.append(spearman(true_scores, report.score_vector(tuple(variables) if variables else None)))
        except ConstantVectorError:
            sprs.append(None)
    defined = [i for i, s in enumerate(sprs) if s is not None]
    if not defined:
        return ExtensionSelection(reports[0], reports[0], None, None, len(reports))
    best = max(defined, key=lambda i: sprs[i])
    worst = min(defined, key=lambda i: sprs[i])
    return ExtensionSelection(reports[best], reports[worst], sprs[best], sprs[worst], len(reports))


def select_extension_minmax(
    extensions: Sequence[Dag],
    data: DiscretizedDataset,
    labels,
    true_scores,
    target: Optional[str] = None,
    labeler: Optional[Labeler] = None,
) -> ExtensionSelection:
    """Score every DAG extension and keep the PC_Max / PC_Min pair."""
    if not extensions:
        raise NoExtensionError("No extension to select from")
    reports = [explain(data, labels, dag, target, labeler) for dag in extensions]
    return select_report_minmax(reports, true_scores, reports[0].variables)
