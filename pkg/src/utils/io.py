import json
import logging
from pathlib import Path
from typing import Any, Union

import numpy as np

from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(payload: Any, path: PathLike) -> None:
    """Write `payload` as indented JSON, converting numpy scalars and arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=_default))
    logger.debug("Wrote %s", path)


def read_json(path: PathLike) -> Any:
    """Read a JSON file.

    Raises:
        ConfigError: if the file is missing or not valid JSON
    """
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"File not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e
