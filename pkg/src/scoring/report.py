import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

from src.graph.dag import graph_to_json
from src.scoring.lewis import ScoreReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CSV_COLUMNS = ["variable", "x", "x_prime", "nec", "suf", "nesuf", "clamped", "max_nesuf"]


def report_to_dict(report: ScoreReport) -> Dict[str, Any]:
    variables = {}
    for name in report.variables:
        variables[name] = {
            "max_nesuf": report.max_nesuf.get(name),
            "adjustment_set": list(report.adjustment_sets.get(name, ())),
            "coverage": {str(code): value for code, value in report.coverage.get(name, {}).items()},
            "pairs": [
                {
                    "x": x,
                    "x_prime": xp,
                    "nec": t.nec,
                    "suf": t.suf,
                    "nesuf": t.nesuf,
                    "raw": {"nec": t.raw_nec, "suf": t.raw_suf, "nesuf": t.raw_nesuf},
                    "clamped": t.clamped,
                }
                for (x, xp), t in report.pairs.get(name, {}).items()
            ],
        }
    return {
        "graph": None if report.no_graph else graph_to_json(report.graph),
        "no_graph": report.no_graph,
        "variables": variables,
        "diagnostics": list(report.diagnostics),
    }


def write_report_json(report: ScoreReport, path: PathLike) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2))
    logger.info("Score report written to %s", path)


def report_frame(report: ScoreReport) -> pd.DataFrame:
    """Flat table with one row per (variable, x, x') pair."""
    rows = []
    for name in report.variables:
        for (x, xp), t in report.pairs.get(name, {}).items():
            rows.append({
                "variable": name,
                "x": x,
                "x_prime": xp,
                "nec": t.nec,
                "suf": t.suf,
                "nesuf": t.nesuf,
                "clamped": t.any_clamped,
                "max_nesuf": report.max_nesuf.get(name),
            })
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_report_csv(report: ScoreReport, path: PathLike) -> None:
    report_frame(report).to_csv(path, index=False)


def reversal_table(report: ScoreReport) -> pd.DataFrame:
    """Nec and Suf of each variable at the pair that attains its maxNesuf.

    Nec reads as the probability that lowering the variable flips a positive
    prediction; Suf as the probability that raising it flips a negative one.
    """
    rows = []
    for name in report.variables:
        pair = report.argmax_pair(name)
        if pair is None:
            continue
        t = report.pairs[name][pair]
        rows.append({
            "variable": name,
            "x": pair[0],
            "x_prime": pair[1],
            "nec": t.nec,
            "suf": t.suf,
            "max_nesuf": t.nesuf,
        })
    frame = pd.DataFrame(rows, columns=["variable", "x", "x_prime", "nec", "suf", "max_nesuf"])
    return frame.sort_values("max_nesuf", ascending=False, kind="stable").reset_index(drop=True)


def write_reversal_csv(report: ScoreReport, path: PathLike) -> None:
    reversal_table(report).to_csv(path, index=False)
