import logging

import numpy as np

from src.data.dataset import Dataset, DiscretizedDataset
from src.data.discretize import recode
from src.scm.model import ScmSpec, sample_do
from src.scoring.probability import POSITIVE, Labeler
from src.utils.errors import EmptyCellError
from src.utils.rng import split_seeds

logger = logging.getLogger(__name__)

ORACLE_SAMPLES = 200_000


def interventional_oracle(
    spec: ScmSpec,
    observed: Dataset,
    coded: DiscretizedDataset,
    labeler: Labeler,
    variable: str,
    code: int,
    n: int = ORACLE_SAMPLES,
    seed: int = 0,
    points: int = 10,
) -> float:
    """Monte-Carlo P(o | do(variable in bin `code`)) pushed through the classifier.

    The bin is represented by `points` evenly spaced quantiles of the observed
    values that fell into it. Each quantile is held fixed for an equal share of
    `n` rows drawn with `sample_do`; every drawn row is recoded with the bins of
    `coded` and labelled by `labeler`.

    Args:
        spec: Generating model
        observed: Continuous sample the bins were fitted on
        coded: Its discretization
        labeler: Classifier under explanation
        variable: Intervened column
        code: Bin of `variable` to intervene on
        n: Total number of interventional rows
        seed: Seed for the interventional draws
        points: Intervention values per bin

    Returns:
        Share of positive labels over all interventional rows

    Raises:
        EmptyCellError: if no observed value fell into the bin
    """
    column = observed.column(variable)
    inside = column[coded.column(variable) == code]
    if inside.size == 0:
        raise EmptyCellError({coded.index(variable): code})
    values = np.quantile(inside, (np.arange(points) + 0.5) / points)
    per_value = max(n // points, 1)
    positives = 0
    for value, child in zip(values, split_seeds(seed, points)):
        draw = sample_do(spec, {spec.index(variable): float(value)}, per_value, child)
        positives += int(np.count_nonzero(np.asarray(labeler(recode(draw, coded))) == POSITIVE))
    result = positives / (per_value * points)
    logger.debug("Oracle P(o | do(%s=%d)) = %.4f over %d rows", variable, code, result, per_value * points)
    return result
