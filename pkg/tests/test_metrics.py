from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from clearance.app.errors import AbsentClassError, MetricError, UndefinedMetricError
from clearance.app.metrics import (
    ConfusionMatrix,
    balanced_accuracy,
    balanced_accuracy_exact,
    confusion,
    precision,
    precision_exact,
)


def test_hand_computed_case():
    c = ConfusionMatrix(tp=3, fn=1, tn=2, fp=4)

    assert balanced_accuracy_exact(c) == Fraction(13, 24)
    assert balanced_accuracy(c) == pytest.approx(0.5416666666)
    assert precision_exact(c) == Fraction(3, 7)
    assert c.total == 10


def test_confusion_counts():
    predicted = [True, True, False, False, True]
    actual = [True, False, False, True, True]

    c = confusion(predicted, actual)

    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)


def test_random_cases_agree_with_rational_formula():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        labels = rng.random(n) < 0.5
        labels[0], labels[1] = True, False
        predictions = rng.random(n) < 0.5

        c = confusion(predictions, labels)

        positives = int(labels.sum())
        negatives = n - positives
        hits = int((predictions & labels).sum())
        rejections = int((~predictions & ~labels).sum())
        expected = (Fraction(hits, positives) + Fraction(rejections, negatives)) / 2
        assert balanced_accuracy_exact(c) == expected
        assert 0.0 <= balanced_accuracy(c) <= 1.0


def test_perfect_and_inverted_predictions():
    labels = np.array([True, False, True, False])
    assert balanced_accuracy(confusion(labels, labels)) == 1.0
    assert balanced_accuracy(confusion(~labels, labels)) == 0.0
    assert precision(confusion(labels, labels)) == 1.0


def test_absent_class_is_an_error():
    with pytest.raises(AbsentClassError) as info:
        balanced_accuracy(confusion([True, False], [False, False]))
    assert info.value.label == "solved"
    with pytest.raises(AbsentClassError):
        balanced_accuracy(ConfusionMatrix(tp=2, fn=1))


def test_precision_without_positive_predictions():
    with pytest.raises(UndefinedMetricError) as info:
        precision(confusion([False, False], [True, False]))
    assert info.value.metric == "precision"


def test_confusion_rejects_mismatched_or_empty_input():
    with pytest.raises(MetricError):
        confusion([True], [True, False])
    with pytest.raises(MetricError):
        confusion([], [])
