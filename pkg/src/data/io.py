import io
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from src.data.dataset import Dataset
from src.utils.errors import ParseError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def kinds_path(path: PathLike) -> Path:
    """Location of the column-kind sidecar for a CSV file."""
    path = Path(path)
    return path.with_name(f"{path.stem}.kinds.json")


def load_csv(path: PathLike, kinds_file: Optional[PathLike] = None) -> Dataset:
    """Load a CSV with a header row into a Dataset.

    Column kinds are read from `kinds_file`, or from the `<stem>.kinds.json`
    sidecar when it exists; columns without an entry are continuous.

    Raises:
        ParseError: on ragged rows, empty or non-numeric cells, non-finite
            values, or non-integer entries in discrete columns. Rows are
            counted from 1 with the header as row 1.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e}") from e
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} has no header row") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"Malformed CSV {path}: {e}") from e

    values = np.empty(frame.shape, dtype=float)
    for c, name in enumerate(frame.columns):
        for r, cell in enumerate(frame[name]):
            cell = cell.strip() if isinstance(cell, str) else ""
            if cell == "":
                raise ParseError("Missing value", row=r + 2, column=name)
            try:
                number = float(cell)
            except ValueError:
                raise ParseError(f"Non-numeric value {cell!r}", row=r + 2, column=name)
            if not np.isfinite(number):
                raise ParseError(f"Non-finite value {cell!r}", row=r + 2, column=name)
            values[r, c] = number

    kinds: Dict[str, str] = {}
    sidecar = Path(kinds_file) if kinds_file is not None else kinds_path(path)
    if sidecar.exists():
        try:
            payload = json.loads(sidecar.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"Malformed kinds sidecar {sidecar}: {e}") from e
        if not isinstance(payload, dict) or not isinstance(payload.get("kinds", {}), dict):
            raise ParseError(f"Kinds sidecar {sidecar} must hold a 'kinds' object")
        kinds = payload.get("kinds", {})
        unknown = set(kinds) - set(frame.columns)
        if unknown:
            raise ParseError(f"Kinds sidecar names unknown columns {sorted(unknown)}")
    column_kinds = tuple(kinds.get(name, "continuous") for name in frame.columns)
    for c, (name, kind) in enumerate(zip(frame.columns, column_kinds)):
        if kind not in ("continuous", "discrete"):
            raise ParseError(f"Unknown column kind {kind!r}", column=name)
        if kind == "discrete":
            bad = np.flatnonzero(np.mod(values[:, c], 1) != 0)
            if bad.size:
                raise ParseError("Discrete column holds a non-integer value", row=int(bad[0]) + 2, column=name)
    logger.info("Loaded %d rows x %d columns from %s", values.shape[0], values.shape[1], path)
    return Dataset(tuple(frame.columns), values, column_kinds)


def save_csv(dataset: Dataset, path: PathLike, write_kinds: bool = True) -> None:
    """Write a Dataset with 17 significant digits, plus its kinds sidecar."""
    path = Path(path)
    dataset.to_frame().to_csv(path, index=False, float_format="%.17g")
    if write_kinds:
        kinds = {name: kind for name, kind in zip(dataset.columns, dataset.kinds)}
        kinds_path(path).write_text(json.dumps({"kinds": kinds}, indent=2))
