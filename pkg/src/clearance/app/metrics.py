from __future__ import annotations

from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, NonNegativeInt

from .errors import AbsentClassError, MetricError, UndefinedMetricError

BoolVector = Union[Sequence[bool], np.ndarray]


class ConfusionMatrix(BaseModel):
    """Counts with solved as the positive class."""

    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    tn: NonNegativeInt = 0
    fn: NonNegativeInt = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions: BoolVector, labels: BoolVector) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(labels, dtype=bool)
    if pred.shape != true.shape:
        raise MetricError(f"length mismatch: {pred.shape[0]} predictions vs {true.shape[0]} labels")
    if pred.size == 0:
        raise MetricError("cannot score an empty prediction set")
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pred & true)),
        fp=int(np.count_nonzero(pred & ~true)),
        tn=int(np.count_nonzero(~pred & ~true)),
        fn=int(np.count_nonzero(~pred & true)),
    )


def balanced_accuracy_exact(c: ConfusionMatrix) -> Fraction:
    """(tp / (tp + fn) + tn / (tn + fp)) / 2 in rational arithmetic."""
    if c.tp + c.fn == 0:
        raise AbsentClassError("solved")
    if c.tn + c.fp == 0:
        raise AbsentClassError("unsolved")
    sensitivity = Fraction(c.tp, c.tp + c.fn)
    specificity = Fraction(c.tn, c.tn + c.fp)
    return (sensitivity + specificity) / 2


def balanced_accuracy(c: ConfusionMatrix) -> float:
    return float(balanced_accuracy_exact(c))


def precision_exact(c: ConfusionMatrix) -> Fraction:
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision", "no positive predictions")
    return Fraction(c.tp, c.tp + c.fp)


def precision(c: ConfusionMatrix) -> float:
    return float(precision_exact(c))


__all__ = [
    "ConfusionMatrix",
    "balanced_accuracy",
    "balanced_accuracy_exact",
    "confusion",
    "precision",
    "precision_exact",
]
