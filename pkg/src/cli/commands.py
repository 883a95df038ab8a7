import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.cli.parser import RunConfig, build_parser, resolve_config
from src.config.settings import DEBUG
from src.data.dataset import Dataset, DiscretizedDataset
from src.data.discretize import discretize_dataset
from src.data.io import load_csv, save_csv
from src.discovery.prior import DiscoveryConfig, DiscoveryOutput, Method, PriorMode, discover_with_prior
from src.eval.experiment import ExperimentConfig, run_experiment, summarize, summary_to_frame
from src.eval.reproduce import reproduce
from src.graph.dag import BackgroundKnowledge, Dag, adjacency_csv, graph_to_json, load_graph, save_graph
from src.model.forest import ForestConfig, fit_forest, forest_labeler, load_labels_csv, predict, training_accuracy
from src.scm.benchmarks import CREDIT_TARGET, make_benchmark, make_credit_demo, make_eight_var
from src.scm.model import load_scm, sample, save_scm
from src.scoring.lewis import ScoreReport, explain, explain_output
from src.scoring.probability import Labeler
from src.scoring.report import reversal_table, write_report_csv, write_report_json, write_reversal_csv
from src.stats.correlation import CiTestConfig
from src.stats.independence import HsicConfig
from src.utils.errors import ConfigError, LewisError, UnsupportedModeForMethodError
from src.utils.io import read_json, write_json
from src.utils.rng import split_seeds

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def discovery_config(cfg: RunConfig) -> DiscoveryConfig:
    return DiscoveryConfig(
        ci=CiTestConfig(alpha=cfg.alpha),
        hsic=HsicConfig(alpha=cfg.hsic_alpha),
        seed=cfg.seed,
    )


def _target_index(data: Dataset, target: str) -> int:
    if target not in data.columns:
        raise ConfigError(f"Target {target!r} is not a column of the data ({', '.join(data.columns)})")
    return data.index(target)


def _fit_labels(
    coded: DiscretizedDataset, target: str, cfg: RunConfig, seed: int
) -> Tuple[np.ndarray, Labeler]:
    """Train the forest on the binarized target; its predictions on the same rows, and the forest as a labeler."""
    features = coded.select([c for c in coded.columns if c != target])
    forest = fit_forest(features, coded.column(target), ForestConfig(seed=seed, n_jobs=cfg.jobs))
    logger.info("Forest training accuracy: %.4f", training_accuracy(forest, features, coded.column(target)))
    return predict(forest, features), forest_labeler(forest)


def _score_table(report: ScoreReport) -> pd.DataFrame:
    frame = pd.DataFrame(
        {"variable": list(report.variables), "max_nesuf": [report.max_nesuf.get(v) for v in report.variables]}
    )
    return frame.sort_values("max_nesuf", ascending=False, na_position="last", kind="stable")


def _write_reports(reports: Sequence[ScoreReport], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(reports) == 1:
        write_report_json(reports[0], out_dir / "report.json")
        write_report_csv(reports[0], out_dir / "report.csv")
        return
    for k, report in enumerate(reports):
        write_report_json(report, out_dir / f"report_{k:03d}.json")
        write_report_csv(report, out_dir / f"report_{k:03d}.csv")


def _output_payload(output: DiscoveryOutput) -> Dict:
    payload = {
        "method": output.method.value,
        "mode": output.mode.value,
        "no_graph": output.no_graph,
        "graph": graph_to_json(output.dags[0]) if len(output.dags) == 1 else None,
        "diagnostics": output.diagnostics,
    }
    if output.pdag is not None:
        payload["pdag"] = graph_to_json(output.pdag)
        payload["extensions"] = [graph_to_json(d) for d in output.dags]
    return payload


def cmd_simulate(cfg: RunConfig) -> int:
    """Sample a benchmark or custom SCM and write the CSV plus the SCM JSON next to it."""
    if cfg.spec is not None:
        spec = load_scm(cfg.spec)
    elif cfg.structure == "eight_var":
        spec = make_eight_var(cfg.form, cfg.noise, cfg.seed)
    else:
        spec = make_benchmark(cfg.structure, cfg.form, cfg.noise)
    data = sample(spec, cfg.n, cfg.seed)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, out)
    save_scm(spec, out.with_name(f"{out.stem}.scm.json"))
    logger.info("Wrote %d x %d sample to %s", data.n_rows, len(data.columns), out)
    return EXIT_OK


def cmd_discover(cfg: RunConfig) -> int:
    data = load_csv(cfg.data)
    output = discover_with_prior(
        Method(cfg.method), PriorMode(cfg.prior), data, _target_index(data, cfg.target), discovery_config(cfg)
    )
    write_json(_output_payload(output), cfg.out)
    if len(output.dags) == 1:
        out = Path(cfg.out)
        adjacency_csv(output.dag, out.with_name(f"{out.stem}.adjacency.csv"))
    logger.info("Graph written to %s", cfg.out)
    return EXIT_OK


def _graph_from_file(path: str, data: Dataset) -> Dag:
    graph = load_graph(path)
    if not isinstance(graph, Dag):
        raise ConfigError(f"{path} has undirected edges; pass one of its DAG extensions")
    unknown = sorted(set(graph.node_names) - set(data.columns))
    if unknown:
        raise ConfigError(f"Graph nodes {unknown} are not columns of the data")
    return graph.ensure_acyclic()


def cmd_explain(cfg: RunConfig) -> int:
    """Discretize, obtain labels, pick or discover the graph, score and write the report."""
    data = load_csv(cfg.data)
    target_index = _target_index(data, cfg.target)
    forest_seed, discovery_seed = split_seeds(cfg.seed, 2)
    coded = discretize_dataset(data, cfg.bins, cfg.scheme, cfg.target)
    labeler: Optional[Labeler] = None
    if cfg.labels_csv is not None:
        labels = load_labels_csv(cfg.labels_csv, data.n_rows)
    else:
        labels, labeler = _fit_labels(coded, cfg.target, cfg, forest_seed)

    if cfg.no_graph:
        reports = [explain(coded, labels, None, cfg.target)]
    elif cfg.graph is not None:
        reports = [explain(coded, labels, _graph_from_file(cfg.graph, data), cfg.target, labeler)]
    else:
        output = discover_with_prior(
            Method(cfg.method),
            PriorMode(cfg.prior),
            data,
            target_index,
            discovery_config(cfg).model_copy(update={"seed": discovery_seed}),
        )
        reports = explain_output(coded, labels, output, cfg.target, labeler)
        if not output.no_graph:
            write_json(_output_payload(output), Path(cfg.out_dir) / "graph.json")

    _write_reports(reports, Path(cfg.out_dir))
    write_json(coded.bin_summary(), Path(cfg.out_dir) / "bins.json")
    for k, report in enumerate(reports):
        if len(reports) > 1:
            print(f"extension {k}")
        print(_score_table(report).to_string(index=False))
    return EXIT_OK


def _experiment_config(cfg: RunConfig) -> ExperimentConfig:
    """Experiment file values win; flags fill in keys the file leaves out."""
    values = read_json(cfg.experiment)
    if not isinstance(values, dict):
        raise ConfigError(f"{cfg.experiment} must hold a JSON object")
    values.setdefault("n_jobs", cfg.jobs)
    values.setdefault("base_seed", cfg.seed)
    values.setdefault("bins", cfg.bins)
    if cfg.trials is not None:
        values["trials"] = cfg.trials
    return ExperimentConfig.model_validate(values)


def cmd_evaluate(cfg: RunConfig) -> int:
    config = _experiment_config(cfg)
    frame = summary_to_frame(summarize(run_experiment(config)))
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    print(frame.to_string(index=False))
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig) -> int:
    kwargs = {"trials": cfg.trials} if cfg.trials is not None else {}
    frames = reproduce(cfg.tables, base_seed=cfg.seed, n_jobs=cfg.jobs, out_dir=cfg.out_dir, **kwargs)
    for table, frame in frames.items():
        print(f"table {table}")
        print(frame.to_string(index=False))
    return EXIT_OK


def cmd_demo_credit(cfg: RunConfig) -> int:
    """Credit-rating walkthrough on synthetic data.

    Ten equal-frequency bins, a forest on the binarized rating, DirectLiNGAM
    on the continuous columns with the industry flag exogenous and the
    rating a sink, then the full report and the Nec/Suf reversal table.
    """
    spec = make_credit_demo()
    data_seed, forest_seed, discovery_seed = split_seeds(cfg.seed, 3)
    data = sample(spec, cfg.n, data_seed)
    coded = discretize_dataset(data, cfg.bins, "equal_frequency", CREDIT_TARGET)
    labels, labeler = _fit_labels(coded, CREDIT_TARGET, cfg, forest_seed)

    bk = BackgroundKnowledge(exogenous_nodes=frozenset({data.index("industry")}))
    output = discover_with_prior(
        Method.LINGAM,
        PriorMode.MODE_B,
        data,
        data.index(CREDIT_TARGET),
        discovery_config(cfg).model_copy(update={"seed": discovery_seed}),
        bk,
    )
    report = explain(coded, labels, output.dag, CREDIT_TARGET, labeler)

    out_dir = Path(cfg.out_dir)
    _write_reports([report], out_dir)
    write_reversal_csv(report, out_dir / "reversal.csv")
    save_graph(output.dag, out_dir / "graph.json")
    save_graph(spec.dag, out_dir / "true_graph.json")
    print(reversal_table(report).to_string(index=False))
    return EXIT_OK


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig], int]] = {
    "simulate": cmd_simulate,
    "discover": cmd_discover,
    "explain": cmd_explain,
    "evaluate": cmd_evaluate,
    "reproduce": cmd_reproduce,
    "demo-credit": cmd_demo_credit,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse, validate and dispatch one invocation; returns the process exit code.

    0 on success, 2 on usage or configuration errors, 1 on any other failure.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return COMMAND_HANDLERS[cfg.command](cfg)
    except (ConfigError, ValidationError, UnsupportedModeForMethodError) as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_USAGE
    except (LewisError, OSError) as e:
        logger.error(f"Error running {args.command}: {str(e)}", exc_info=DEBUG)
        return EXIT_RUNTIME
