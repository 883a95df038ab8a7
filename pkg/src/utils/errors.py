from typing import Any, Dict, Optional


class LewisError(Exception):
    """Base class for every error raised by the explanation pipeline."""


class ConfigError(LewisError):
    """Invalid flags, config files or benchmark identifiers."""


class CyclicGraphError(LewisError):
    """A graph that must be acyclic contains a directed cycle."""


class ConstraintConflictError(LewisError):
    """Background knowledge cannot be satisfied on the given graph."""


class NoExtensionError(LewisError):
    """A partially directed graph admits no consistent DAG extension."""


class DegenerateColumnError(LewisError):
    """A column is constant where variation is required."""

    def __init__(self, column: Optional[str] = None, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"Column {column!r} is constant")


class ParseError(LewisError):
    """Malformed tabular input, located by 1-based row and column name."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class SingleClassInputError(LewisError):
    """Classifier training labels contain a single class."""


class SchemaMismatchError(LewisError):
    """Prediction features do not match the columns seen during fit."""


class SingularSubmatrixError(LewisError):
    """A correlation submatrix could not be inverted."""


class InsufficientSamplesError(LewisError):
    """Too few rows for the requested statistic."""


class RankDeficientError(LewisError):
    """Predictor matrix is not of full column rank."""


class UnsupportedModeForMethodError(LewisError):
    """The discovery method cannot incorporate the requested prior mode."""


class EmptyCellError(LewisError):
    """No rows match a conditioning event."""

    def __init__(self, conditions: Dict[int, Any]):
        self.conditions = dict(conditions)
        super().__init__(f"No rows match conditions {self.conditions}")


class UndefinedScoreError(LewisError):
    """A score denominator has zero frequency."""


class NoValidPairError(LewisError):
    """Every value pair of a variable was skipped."""


class ShapeMismatchError(LewisError):
    """Score arrays do not share a shape."""


class ConstantVectorError(LewisError):
    """Rank correlation is undefined for a constant vector."""


class ConflictingOrientationWarning(UserWarning):
    """Two v-structures demanded opposite directions on one edge."""


class ReverseCausationWarning(UserWarning):
    """The target is a parent of the variable being scored."""


class NonConvergenceWarning(UserWarning):
    """The augmented Lagrangian loop stopped with h above tolerance."""
