import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tqdm import tqdm

from src.config.settings import DEFAULT_BINS, DEFAULT_JOBS, DEFAULT_SAMPLE_SIZE, DEFAULT_TRIALS
from src.data.dataset import Dataset, DiscretizedDataset
from src.data.discretize import discretize_dataset
from src.discovery.prior import SINK_UNSUPPORTED, DiscoveryConfig, Method, PriorMode, discover_with_prior
from src.eval.metrics import mae_bar, select_report_minmax, spearman
from src.model.forest import ForestConfig, fit_forest, forest_labeler, predict
from src.scm.benchmarks import TARGET, eight_var_target, make_benchmark, make_eight_var
from src.scm.model import ScmSpec, sample
from src.scoring.lewis import ScoreReport, explain, explain_output
from src.scoring.probability import Labeler
from src.utils.errors import ConstantVectorError, LewisError
from src.utils.rng import split_seeds

logger = logging.getLogger(__name__)

TRUE_METHOD = "true"
NO_GRAPH = "nograph"
NO_MODE = "-"


class CellSpec(BaseModel):
    """One method x prior-mode cell; `true` scores with the generating graph."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Literal["pc", "lingam", "resit", "notears", "true"]
    mode: Literal["0", "a", "b"] = "0"

    @model_validator(mode="after")
    def _check_mode(self) -> "CellSpec":
        if self.mode == PriorMode.MODE_B.value and self.method in {m.value for m in SINK_UNSUPPORTED}:
            raise ValueError(f"{self.method} does not support prior mode b")
        return self


class ExperimentConfig(BaseModel):
    """Artificial-data experiment: data regime, pipeline settings and the cells to evaluate."""

    model_config = ConfigDict(extra="forbid")

    benchmark: Literal["eight_var", "A", "B", "C", "D", "E"] = "eight_var"
    form: Literal["linear", "nonlinear"] = "linear"
    noise: Literal["uniform", "gaussian"] = "uniform"
    topology: Optional[str] = None
    sample_size: int = Field(default=DEFAULT_SAMPLE_SIZE, ge=10)
    bins: int = Field(default=DEFAULT_BINS, ge=2)
    scheme: Literal["equal_width", "equal_frequency"] = "equal_width"
    discover_on: Literal["continuous", "discretized"] = "continuous"
    forest: ForestConfig = Field(default_factory=lambda: ForestConfig(n_jobs=1))
    discovery: DiscoveryConfig = Field(default_factory=DiscoveryConfig)
    cells: List[CellSpec] = Field(default_factory=lambda: [CellSpec(method="lingam", mode="0")])
    include_no_graph: bool = True
    trials: int = Field(default=DEFAULT_TRIALS, ge=1)
    base_seed: int = 0
    n_jobs: int = DEFAULT_JOBS

    @field_validator("cells")
    @classmethod
    def _unique_cells(cls, cells: List[CellSpec]) -> List[CellSpec]:
        keys = [(c.method, c.mode) for c in cells]
        if len(set(keys)) != len(keys):
            raise ValueError("Duplicate method/mode cells")
        return cells


@dataclass
class TrialResult:
    """Scores of one method x mode cell in one trial.

    `method` is `pc_max` / `pc_min` for the two PC selections and `nograph`
    for the shared no-graph cell. `error` is set when the cell failed.
    """

    seed: int
    method: str
    mode: str
    variables: Tuple[str, ...]
    true_scores: np.ndarray
    est_scores: Optional[np.ndarray] = None
    mae: Optional[float] = None
    spr: Optional[float] = None
    error: Optional[str] = None
    diagnostics: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class CellSummary:
    method: str
    mode: str
    mae_mean: float
    mae_stderr: float
    spr_mean: Optional[float]
    n_trials: int
    n_spr: int
    n_errors: int


@dataclass(frozen=True)
class MetricsSummary:
    cells: Tuple[CellSummary, ...]

    def cell(self, method: str, mode: str) -> CellSummary:
        for c in self.cells:
            if c.method == method and c.mode == mode:
                return c
        raise KeyError(f"No cell {method}({mode})")


def build_scm(config: ExperimentConfig) -> Tuple[ScmSpec, str]:
    """Generating model and target name for a config; weights are fixed by `base_seed`."""
    if config.benchmark == "eight_var":
        spec = make_eight_var(config.form, config.noise, config.base_seed, config.topology)
        return spec, eight_var_target(config.topology)
    return make_benchmark(config.benchmark, config.form, config.noise), TARGET


def _discovery_data(config: ExperimentConfig, data: Dataset, coded: DiscretizedDataset) -> Dataset:
    if config.discover_on == "continuous":
        return data
    return Dataset(coded.columns, coded.codes.astype(float))


def _vector(report: ScoreReport, variables: Sequence[str], diagnostics: List[str]) -> np.ndarray:
    for v in variables:
        if report.max_nesuf.get(v) is None:
            diagnostics.append(f"{v}: no valid pair, scored 0")
    return report.score_vector(tuple(variables))


def _finish(result: TrialResult) -> TrialResult:
    result.mae = mae_bar(result.true_scores, result.est_scores)
    try:
        result.spr = spearman(result.true_scores, result.est_scores)
    except ConstantVectorError as e:
        result.diagnostics.append(f"SPR undefined: {e}")
    return result


def _cell_results(
    cell: CellSpec,
    config: ExperimentConfig,
    seed: int,
    discovery_seed: int,
    truth: Tuple[ScmSpec, str, np.ndarray, Tuple[str, ...]],
    data: Dataset,
    coded: DiscretizedDataset,
    labels: np.ndarray,
    labeler: Labeler,
) -> List[TrialResult]:
    spec, target, true_vec, variables = truth
    if cell.method == TRUE_METHOD:
        diagnostics: List[str] = []
        est = _vector(explain(coded, labels, spec.dag, target, labeler), variables, diagnostics)
        return [_finish(TrialResult(seed, TRUE_METHOD, cell.mode, variables, true_vec, est, diagnostics=diagnostics))]

    discovery = config.discovery.model_copy(update={"seed": discovery_seed})
    source = _discovery_data(config, data, coded)
    output = discover_with_prior(cell.method, cell.mode, source, source.index(target), discovery)
    reports = explain_output(coded, labels, output, target, labeler)
    base = output.diagnostics
    if Method(cell.method) == Method.PC:
        selection = select_report_minmax(reports, true_vec, variables)
        results = []
        for name, report in (("pc_max", selection.max_report), ("pc_min", selection.min_report)):
            diagnostics = [f"{k}: {v}" for k, v in base.items()]
            est = _vector(report, variables, diagnostics)
            results.append(_finish(TrialResult(seed, name, cell.mode, variables, true_vec, est, diagnostics=diagnostics)))
        return results
    diagnostics = [f"{k}: {v}" for k, v in base.items()]
    est = _vector(reports[0], variables, diagnostics)
    return [_finish(TrialResult(seed, cell.method, cell.mode, variables, true_vec, est, diagnostics=diagnostics))]


def _cell_names(cell: CellSpec) -> List[str]:
    return ["pc_max", "pc_min"] if cell.method == Method.PC.value else [cell.method]


def run_trial(config: ExperimentConfig, seed: int) -> List[TrialResult]:
    """One trial of the pipeline, returning a result per method x mode cell.

    Data are sampled from the generating model, discretized with the target
    binarized, and used to train the forest whose predictions on the same rows
    are explained. The true scores come from the generating graph; the `true`
    cell scores that graph again through the same path as every other cell.
    A failing cell records its error and the other cells still run.
    """
    spec, target = build_scm(config)
    data_seed, forest_seed, discovery_seed = split_seeds(seed, 3)
    variables = tuple(c for c in spec.node_names if c != target)

    data = sample(spec, config.sample_size, data_seed)
    try:
        coded = discretize_dataset(data, config.bins, config.scheme, target)
        features = coded.select(variables)
        forest = fit_forest(features, coded.column(target), config.forest.model_copy(update={"seed": forest_seed}))
        labels = predict(forest, features)
        labeler = forest_labeler(forest)
        true_diagnostics: List[str] = []
        true_vec = _vector(explain(coded, labels, spec.dag, target, labeler), variables, true_diagnostics)
    except LewisError as e:
        logger.error("Trial %d failed before scoring: %s", seed, e)
        empty = np.zeros(len(variables))
        failed = [
            TrialResult(seed, name, cell.mode, variables, empty, error=str(e))
            for cell in config.cells
            for name in _cell_names(cell)
        ]
        if config.include_no_graph:
            failed.append(TrialResult(seed, NO_GRAPH, NO_MODE, variables, empty, error=str(e)))
        return failed

    truth = (spec, target, true_vec, variables)
    results: List[TrialResult] = []
    for cell in config.cells:
        try:
            results.extend(_cell_results(cell, config, seed, discovery_seed, truth, data, coded, labels, labeler))
        except LewisError as e:
            logger.warning("Trial %d cell %s(%s) failed: %s", seed, cell.method, cell.mode, e)
            results.extend(
                TrialResult(seed, name, cell.mode, variables, true_vec, error=str(e), diagnostics=true_diagnostics[:])
                for name in _cell_names(cell)
            )
    if config.include_no_graph:
        diagnostics = true_diagnostics[:]
        est = _vector(explain(coded, labels, None, target), variables, diagnostics)
        results.append(_finish(TrialResult(seed, NO_GRAPH, NO_MODE, variables, true_vec, est, diagnostics=diagnostics)))
    return results


def run_experiment(config: ExperimentConfig, progress: bool = True) -> List[TrialResult]:
    """Run `config.trials` trials with seeds base_seed + i, in parallel over `n_jobs` workers."""
    seeds = [config.base_seed + i for i in range(config.trials)]
    logger.info(
        "Running %d trials (%s, %s, %s) on %d worker(s)",
        config.trials, config.benchmark, config.form, config.noise, config.n_jobs,
    )
    batches = Parallel(n_jobs=config.n_jobs)(
        delayed(run_trial)(config, s) for s in tqdm(seeds, desc="trials", disable=not progress)
    )
    return [result for batch in batches for result in batch]


def summarize(trials: Sequence[TrialResult]) -> MetricsSummary:
    """Fold trial results into MAE-bar +/- standard error and mean SPR per cell.

    Failed trials are excluded and counted; trials with an undefined SPR are
    left out of the SPR mean only.
    """
    groups: Dict[Tuple[str, str], List[TrialResult]] = {}
    for t in trials:
        groups.setdefault((t.method, t.mode), []).append(t)
    cells = []
    for (method, mode), group in groups.items():
        ok = [t for t in group if t.error is None]
        maes = np.array([t.mae for t in ok], dtype=float)
        sprs = np.array([t.spr for t in ok if t.spr is not None], dtype=float)
        n = maes.size
        cells.append(CellSummary(
            method=method,
            mode=mode,
            mae_mean=float(maes.mean()) if n else float("nan"),
            mae_stderr=float(maes.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            spr_mean=float(sprs.mean()) if sprs.size else None,
            n_trials=n,
            n_spr=int(sprs.size),
            n_errors=len(group) - n,
        ))
    return MetricsSummary(tuple(cells))


def summary_to_frame(summary: MetricsSummary) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "method": c.method,
                "mode": c.mode,
                "mae_mean": c.mae_mean,
                "mae_stderr": c.mae_stderr,
                "spr_mean": c.spr_mean,
                "n_trials": c.n_trials,
                "n_spr": c.n_spr,
                "n_errors": c.n_errors,
            }
            for c in summary.cells
        ],
        columns=["method", "mode", "mae_mean", "mae_stderr", "spr_mean", "n_trials", "n_spr", "n_errors"],
    )


def mean_true_scores(trials: Sequence[TrialResult]) -> Dict[str, float]:
    """Average true maxNesuf per variable over the distinct successful trials."""
    seen: Dict[int, np.ndarray] = {}
    variables: Tuple[str, ...] = ()
    for t in trials:
        if t.error is None and t.seed not in seen:
            seen[t.seed] = t.true_scores
            variables = t.variables
    if not seen:
        return {}
    means = np.mean(np.vstack(list(seen.values())), axis=0)
    return {v: float(m) for v, m in zip(variables, means)}


def structure_study(
    form: str,
    trials: int = DEFAULT_TRIALS,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    bins: int = DEFAULT_BINS,
    base_seed: int = 0,
    forest: Optional[ForestConfig] = None,
    n_jobs: int = DEFAULT_JOBS,
    structures: Sequence[str] = ("A", "B", "C", "D", "E"),
) -> pd.DataFrame:
    """Mean true-graph maxNesuf of X and Z for each three-variable structure.

    Rows are structures, columns the explanatory variables.
    """
    rows = {}
    for structure in structures:
        config = ExperimentConfig(
            benchmark=structure,
            form=form,
            sample_size=sample_size,
            bins=bins,
            forest=forest or ForestConfig(n_jobs=1),
            cells=[CellSpec(method=TRUE_METHOD)],
            include_no_graph=False,
            trials=trials,
            base_seed=base_seed,
            n_jobs=n_jobs,
        )
        rows[structure] = mean_true_scores(run_experiment(config, progress=False))
    return pd.DataFrame.from_dict(rows, orient="index")
