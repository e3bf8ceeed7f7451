from __future__ import annotations

from typing import Optional


class ClearanceError(Exception):
    """Base class for every error raised by the pipeline."""


class ConfigError(ClearanceError):
    pass


class DatasetError(ClearanceError):
    pass


class SchemaError(DatasetError):
    """Input file lacks a required column."""

    def __init__(self, column: str, source: str = "") -> None:
        self.column = column
        where = f" in {source}" if source else ""
        super().__init__(f"missing required column {column!r}{where}")


class EmptyDatasetError(DatasetError):
    pass


class RowError(DatasetError):
    """A single input row could not be parsed. Rows are dropped and counted, not fatal."""

    def __init__(self, line: int, message: str) -> None:
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class FeatureError(ClearanceError):
    pass


class ModelError(ClearanceError):
    pass


class SchemaMismatchError(ModelError):
    pass


class NotFittedError(ModelError):
    pass


class ShapError(ClearanceError):
    pass


class MetricError(ClearanceError):
    pass


class AbsentClassError(MetricError):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"balanced accuracy undefined: no {label} labels")


class UndefinedMetricError(MetricError):
    def __init__(self, metric: str, reason: Optional[str] = None) -> None:
        self.metric = metric
        super().__init__(f"{metric} undefined" + (f": {reason}" if reason else ""))


class CrossValidationError(ClearanceError):
    pass


class LinkageError(ClearanceError):
    pass
