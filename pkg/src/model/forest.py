import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Protocol, Tuple, Union, runtime_checkable

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from src.config.settings import DEFAULT_JOBS
from src.data.dataset import DiscretizedDataset
from src.utils.errors import (
    InsufficientSamplesError,
    ParseError,
    SchemaMismatchError,
    SingleClassInputError,
)
from src.utils.rng import generator, split_seeds

logger = logging.getLogger(__name__)

LEAF = -1


@runtime_checkable
class ClassifierContract(Protocol):
    """Anything that can be trained on coded features and return 0/1 labels."""

    def fit(self, features: DiscretizedDataset, labels: np.ndarray) -> "ClassifierContract":
        ...

    def predict(self, features: DiscretizedDataset) -> np.ndarray:
        ...


class ForestConfig(BaseModel):
    """Random forest settings; `max_features=None` means ceil(sqrt(p)) per split.

    A node is split only when its impurity decrease, weighted by the share of
    training rows reaching it, is at least `min_impurity_decrease`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_trees: int = Field(default=100, ge=1)
    max_depth: int = Field(default=6, ge=1)
    max_features: Optional[int] = Field(default=None, ge=1)
    min_samples_split: int = Field(default=2, ge=2)
    min_impurity_decrease: float = Field(default=0.002, ge=0)
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = DEFAULT_JOBS


@dataclass(frozen=True)
class Tree:
    """Binary tree in flat arrays; node 0 is the root, leaves have feature == -1.

    Rows with `x[feature] < threshold` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    def predict(self, codes: np.ndarray) -> np.ndarray:
        node = np.zeros(codes.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = codes[rows, self.feature[current]] < self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return self.label[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "label": self.label.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Tree":
        return cls(
            np.asarray(payload["feature"], dtype=np.int64),
            np.asarray(payload["threshold"], dtype=float),
            np.asarray(payload["left"], dtype=np.int64),
            np.asarray(payload["right"], dtype=np.int64),
            np.asarray(payload["label"], dtype=np.int64),
        )


@dataclass(frozen=True)
class Forest:
    columns: Tuple[str, ...]
    trees: Tuple[Tree, ...]
    config: ForestConfig


def _gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity per row of a (m, 2) class-count array."""
    totals = counts.sum(axis=1)
    safe = np.where(totals == 0, 1, totals)
    share = counts / safe[:, None]
    return 1.0 - np.sum(share ** 2, axis=1)


def _majority(y: np.ndarray) -> int:
    ones = int(y.sum())
    return 1 if 2 * ones >= y.size else 0


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray) -> Optional[Tuple[int, float, float]]:
    """Lowest weighted Gini over midpoints between consecutive observed codes."""
    n = y.size
    best = None
    for f in features:
        levels, inverse = np.unique(X[:, f], return_inverse=True)
        if levels.size < 2:
            continue
        ones = np.bincount(inverse, weights=y, minlength=levels.size)
        totals = np.bincount(inverse, minlength=levels.size).astype(float)
        left = np.column_stack([np.cumsum(totals - ones), np.cumsum(ones)])[:-1]
        right = np.array([totals.sum() - ones.sum(), ones.sum()]) - left
        n_left = left.sum(axis=1)
        cost = (n_left * _gini(left) + (n - n_left) * _gini(right)) / n
        k = int(np.argmin(cost))
        if best is None or cost[k] < best[2]:
            best = (int(f), float((levels[k] + levels[k + 1]) / 2), float(cost[k]))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig, seed: int) -> Tree:
    rng = generator(seed)
    n, p = X.shape
    rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
    n_features = min(config.max_features or math.ceil(math.sqrt(p)), p)
    feature, threshold, left, right, label = [], [], [], [], []

    def new_node() -> int:
        for column in (feature, left, right, label):
            column.append(LEAF)
        threshold.append(0.0)
        return len(feature) - 1

    def grow(node: int, idx: np.ndarray, depth: int) -> None:
        ys = y[idx]
        label[node] = _majority(ys)
        if depth >= config.max_depth or idx.size < config.min_samples_split or ys.min() == ys.max():
            return
        candidates = rng.choice(p, size=n_features, replace=False)
        split = _best_split(X[idx], ys, candidates)
        if split is None:
            return
        parent_impurity = _gini(np.array([[ys.size - ys.sum(), ys.sum()]], dtype=float))[0]
        decrease = ys.size / rows.size * (parent_impurity - split[2])
        if decrease <= 1e-12 or decrease < config.min_impurity_decrease:
            return
        f, cut, _ = split
        mask = X[idx, f] < cut
        feature[node], threshold[node] = f, cut
        left[node] = new_node()
        right[node] = new_node()
        grow(left[node], idx[mask], depth + 1)
        grow(right[node], idx[~mask], depth + 1)

    grow(new_node(), rows, 0)
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(label, dtype=np.int64),
    )


def _validate_labels(labels, n_rows: int) -> np.ndarray:
    y = np.asarray(labels).ravel()
    if y.size != n_rows:
        raise ValueError(f"Got {y.size} labels for {n_rows} rows")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("Labels must be 0 or 1")
    return y.astype(np.int64)


def fit_forest(features: DiscretizedDataset, labels, config: Optional[ForestConfig] = None) -> Forest:
    """Train a random forest of Gini trees on integer-coded features.

    Each tree draws its bootstrap rows and per-split feature subsets from its
    own seed, so the result does not depend on `n_jobs`.

    Args:
        features: Coded explanatory columns
        labels: 0/1 label per row
        config: Forest settings

    Returns:
        Fitted, immutable Forest

    Raises:
        InsufficientSamplesError: with fewer than 2 rows
        SingleClassInputError: if only one class is present
    """
    config = config or ForestConfig()
    if features.n_rows < 2:
        raise InsufficientSamplesError("A forest needs at least 2 training rows")
    y = _validate_labels(labels, features.n_rows)
    if np.unique(y).size < 2:
        raise SingleClassInputError(f"Training labels contain only class {int(y[0])}")
    X = features.codes
    seeds = split_seeds(config.seed, config.n_trees)
    trees = Parallel(n_jobs=config.n_jobs)(delayed(_grow_tree)(X, y, config, s) for s in seeds)
    logger.info("Fitted %d trees on %d rows x %d features", len(trees), *X.shape)
    return Forest(features.columns, tuple(trees), config)


def predict(model: Forest, features: DiscretizedDataset) -> np.ndarray:
    """Majority vote over the trees; a tied vote yields 1."""
    if tuple(features.columns) != tuple(model.columns):
        raise SchemaMismatchError(f"Model expects columns {list(model.columns)}, got {list(features.columns)}")
    votes = np.zeros(features.n_rows, dtype=np.int64)
    for tree in model.trees:
        votes += tree.predict(features.codes)
    return (2 * votes >= len(model.trees)).astype(np.int64)


def forest_labeler(model: Forest) -> Callable[[DiscretizedDataset], np.ndarray]:
    """Prediction function over any coded table that holds the model's columns."""

    def label(data: DiscretizedDataset) -> np.ndarray:
        return predict(model, data.select(model.columns))

    return label


def training_accuracy(model: Forest, features: DiscretizedDataset, labels) -> float:
    y = _validate_labels(labels, features.n_rows)
    return float(np.mean(predict(model, features) == y))


class RandomForestClassifier:
    """ClassifierContract wrapper around fit_forest / predict."""

    def __init__(self, config: Optional[ForestConfig] = None):
        self.config = config or ForestConfig()
        self.model: Optional[Forest] = None

    def fit(self, features: DiscretizedDataset, labels) -> "RandomForestClassifier":
        self.model = fit_forest(features, labels, self.config)
        return self

    def predict(self, features: DiscretizedDataset) -> np.ndarray:
        if self.model is None:
            raise RuntimeError("Classifier is not fitted")
        return predict(self.model, features)


def save_forest(model: Forest, path: Union[str, Path]) -> None:
    payload = {
        "columns": list(model.columns),
        "config": model.config.model_dump(),
        "trees": [tree.to_dict() for tree in model.trees],
    }
    Path(path).write_text(json.dumps(payload))


def load_forest(path: Union[str, Path]) -> Forest:
    payload = json.loads(Path(path).read_text())
    return Forest(
        tuple(payload["columns"]),
        tuple(Tree.from_dict(t) for t in payload["trees"]),
        ForestConfig.model_validate(payload["config"]),
    )


def load_labels_csv(path: Union[str, Path], n_rows: Optional[int] = None) -> np.ndarray:
    """Read externally produced predictions: one column of 0/1 values under a header.

    Raises:
        ParseError: on extra columns, non-binary values, or a row-count mismatch
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"Cannot read labels from {path}: {e}") from e
    if frame.shape[1] != 1:
        raise ParseError(f"Labels file must have exactly one column, found {frame.shape[1]}")
    name = frame.columns[0]
    labels: List[int] = []
    for r, cell in enumerate(frame[name]):
        cell = cell.strip() if isinstance(cell, str) else ""
        if cell not in ("0", "1"):
            raise ParseError(f"Label {cell!r} is not 0 or 1", row=r + 2, column=name)
        labels.append(int(cell))
    if n_rows is not None and len(labels) != n_rows:
        raise ParseError(f"Labels file has {len(labels)} rows, data has {n_rows}")
    return np.asarray(labels, dtype=np.int64)
