import argparse
import logging
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.settings import (
    DEFAULT_ALPHA,
    DEFAULT_BINS,
    DEFAULT_HSIC_ALPHA,
    DEFAULT_JOBS,
    DEFAULT_SAMPLE_SIZE,
)
from src.utils.errors import ConfigError
from src.utils.io import read_json

logger = logging.getLogger(__name__)

ALL_TABLES = [2, 3, 4, 5, 6, 7]


class RunConfig(BaseModel):
    """Validated flags of one CLI invocation.

    Values from a `--config` JSON file override the command-line flags. Unknown
    keys are rejected and the options each sub-command needs are checked
    before any work starts.
    """

    model_config = ConfigDict(extra="forbid")

    command: Literal["simulate", "discover", "explain", "evaluate", "reproduce", "demo-credit"]
    seed: int = 0
    jobs: int = DEFAULT_JOBS
    alpha: float = Field(default=DEFAULT_ALPHA, gt=0, lt=1)
    hsic_alpha: float = Field(default=DEFAULT_HSIC_ALPHA, gt=0, lt=1)
    bins: int = Field(default=DEFAULT_BINS, ge=2)

    # simulate
    structure: Optional[Literal["A", "B", "C", "D", "E", "eight_var"]] = None
    form: Literal["linear", "nonlinear"] = "linear"
    noise: Literal["uniform", "gaussian", "mixed"] = "uniform"
    n: int = Field(default=DEFAULT_SAMPLE_SIZE, ge=1)
    spec: Optional[str] = None

    # discover / explain
    data: Optional[str] = None
    target: Optional[str] = None
    method: Optional[Literal["pc", "lingam", "resit", "notears"]] = None
    prior: Literal["0", "a", "b", "nograph"] = "0"
    graph: Optional[str] = None
    no_graph: bool = False
    labels_csv: Optional[str] = None
    scheme: Literal["equal_width", "equal_frequency"] = "equal_width"

    # evaluate / reproduce
    experiment: Optional[str] = None
    trials: Optional[int] = Field(default=None, ge=1)
    tables: List[int] = Field(default_factory=lambda: list(ALL_TABLES))

    out: Optional[str] = None
    out_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check_command(self) -> "RunConfig":
        def need(*names: str) -> None:
            missing = [f"--{name.replace('_', '-')}" for name in names if getattr(self, name) in (None, "")]
            if missing:
                raise ValueError(f"{self.command} requires {', '.join(missing)}")

        if self.command == "simulate":
            need("out")
            if (self.structure is None) == (self.spec is None):
                raise ValueError("simulate requires exactly one of --structure or --spec")
        elif self.command == "discover":
            need("data", "target", "method", "out")
        elif self.command == "explain":
            need("data", "target", "out_dir")
            sources = sum([self.graph is not None, self.method is not None, self.no_graph])
            if sources != 1:
                raise ValueError("explain requires exactly one of --graph, --method or --no-graph")
        elif self.command == "evaluate":
            need("experiment", "out")
        elif self.command == "demo-credit":
            need("out_dir")
        unknown = sorted(set(self.tables) - set(ALL_TABLES))
        if unknown:
            raise ValueError(f"Unknown tables {unknown}; expected values in {ALL_TABLES}")
        return self


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Random seed")
    common.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Worker processes (default: LEWIS_JOBS)")
    common.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Fisher-z significance level")
    common.add_argument("--hsic-alpha", type=float, default=DEFAULT_HSIC_ALPHA, help="HSIC significance level")
    common.add_argument("--bins", type=int, default=DEFAULT_BINS, help="Bins per continuous column")
    common.add_argument("--config", help="JSON file whose keys override these flags")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lewis-explain",
        description="Counterfactual probability explanations of binary classifiers with causal discovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()

    simulate = sub.add_parser("simulate", parents=[common], help="Sample a benchmark or custom SCM to CSV")
    simulate.add_argument("--structure", choices=["A", "B", "C", "D", "E", "eight_var"])
    simulate.add_argument("--spec", help="Custom SCM JSON file")
    simulate.add_argument("--form", choices=["linear", "nonlinear"], default="linear")
    simulate.add_argument("--noise", choices=["uniform", "gaussian", "mixed"], default="uniform")
    simulate.add_argument("--n", type=int, default=DEFAULT_SAMPLE_SIZE, help="Number of rows")
    simulate.add_argument("--out", help="Output CSV path")

    discover = sub.add_parser("discover", parents=[common], help="Estimate a causal graph from a CSV")
    discover.add_argument("--data", help="Input CSV")
    discover.add_argument("--target", help="Target column name")
    discover.add_argument("--method", choices=["pc", "lingam", "resit", "notears"])
    discover.add_argument("--prior", choices=["0", "a", "b", "nograph"], default="0")
    discover.add_argument("--out", help="Output graph JSON path")

    explain = sub.add_parser("explain", parents=[common], help="Score every explanatory variable")
    explain.add_argument("--data", help="Input CSV")
    explain.add_argument("--target", help="Target column name")
    source = explain.add_mutually_exclusive_group()
    source.add_argument("--graph", help="Graph JSON file")
    source.add_argument("--method", choices=["pc", "lingam", "resit", "notears"])
    source.add_argument("--no-graph", action="store_true", help="Score with conditionals only")
    explain.add_argument("--prior", choices=["0", "a", "b", "nograph"], default="0")
    explain.add_argument("--labels-csv", help="Predictions of an external classifier, one per row")
    explain.add_argument("--scheme", choices=["equal_width", "equal_frequency"], default="equal_width")
    explain.add_argument("--out-dir", help="Directory for the report files")

    evaluate = sub.add_parser("evaluate", parents=[common], help="Run an artificial-data experiment")
    evaluate.add_argument("--experiment", help="Experiment JSON file")
    evaluate.add_argument("--trials", type=int, help="Override the number of trials")
    evaluate.add_argument("--out", help="Output CSV with one row per cell")

    reproduce = sub.add_parser("reproduce", parents=[common], help="Run the canned experiment tables")
    reproduce.add_argument("--tables", type=int, nargs="+", default=list(ALL_TABLES))
    reproduce.add_argument("--trials", type=int, help="Trials per table")
    reproduce.add_argument("--out-dir", help="Directory for table_<k>.csv files")

    demo = sub.add_parser("demo-credit", parents=[common], help="Synthetic credit-rating walkthrough")
    demo.add_argument("--n", type=int, default=DEFAULT_SAMPLE_SIZE, help="Number of rows")
    demo.add_argument("--out-dir", help="Directory for the report and graph files")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge parsed flags with the optional `--config` JSON file and validate.

    Raises:
        ConfigError: if the config file cannot be read
        pydantic.ValidationError: on unknown keys or invalid values
    """
    values = {k: v for k, v in vars(args).items() if k != "config"}
    if args.config:
        overrides = read_json(args.config)
        if not isinstance(overrides, dict):
            raise ConfigError(f"{args.config} must hold a JSON object")
        logger.info("Applying %d override(s) from %s", len(overrides), args.config)
        values.update(overrides)
    return RunConfig.model_validate(values)
