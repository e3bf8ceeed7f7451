from __future__ import annotations

import numpy as np
import pytest

from conftest import binary_matrix

from clearance.app.errors import AbsentClassError, ConfigError, CrossValidationError
from clearance.app.learners import default_grid, expand_grid, fit, state_grid
from clearance.app.models import ConfigResult, FoldScore, Hyperparameters
from clearance.app.validation import (
    cross_validate,
    fold_indices,
    grid_search,
    holdout_score,
    score_predictions,
    select_winner,
    stratified_kfold,
    summarize_folds,
)


def test_seventy_thirty_split_deals_even_folds():
    labels = np.array([True] * 70 + [False] * 30)

    folds = stratified_kfold(labels, 5, seed=42)

    for f in range(5):
        members = labels[folds == f]
        assert (members.sum(), (~members).sum()) == (14, 6)


@pytest.mark.parametrize("k", [2, 5, 10])
def test_fold_class_counts_stay_within_one(k):
    rng = np.random.default_rng(k)
    for seed in range(1000):
        labels = rng.random(int(rng.integers(2 * k, 300))) < rng.uniform(0.05, 0.95)
        labels[:k] = True
        labels[k : 2 * k] = False

        folds = stratified_kfold(labels, k, seed)

        sizes = np.bincount(folds, minlength=k)
        assert sizes.max() - sizes.min() <= 1
        for cls in (False, True):
            n = int((labels == cls).sum())
            per_fold = np.bincount(folds[labels == cls], minlength=k)
            assert np.all(np.abs(per_fold - n / k) < 1)
        seen = np.concatenate([test for _, test in fold_indices(folds, k)])
        assert sorted(seen.tolist()) == list(range(labels.size))


def test_folds_are_deterministic_per_seed():
    labels = np.arange(100) % 3 == 0

    first = stratified_kfold(labels, 5, seed=9)

    assert np.array_equal(first, stratified_kfold(labels, 5, seed=9))
    assert not np.array_equal(first, stratified_kfold(labels, 5, seed=10))


def test_fold_preconditions():
    with pytest.raises(CrossValidationError):
        stratified_kfold([True, False] * 10, 1, seed=0)
    with pytest.raises(CrossValidationError):
        stratified_kfold([True, False] * 10, 5, seed=-1)
    with pytest.raises(CrossValidationError):
        stratified_kfold([True] * 10 + [False] * 3, 5, seed=0)


def test_single_class_folds_are_dealt_without_error():
    folds = stratified_kfold([True] * 10, 5, seed=0)
    assert np.bincount(folds).tolist() == [2, 2, 2, 2, 2]


def test_cross_validate_reports_every_fold(random_matrix, settings):
    matrix = random_matrix(n=200, seed=1)
    h = Hyperparameters(algorithm="decision_tree", max_depth=3)

    result = cross_validate(matrix, h, k=4, seed=3, settings=settings)

    assert [f.fold for f in result.folds] == [0, 1, 2, 3]
    assert sum(f.n_test for f in result.folds) == len(matrix)
    ba = [f.balanced_accuracy for f in result.folds]
    assert result.mean_balanced_accuracy == pytest.approx(np.mean(ba))
    assert result.sd_balanced_accuracy == pytest.approx(np.std(ba))


def test_single_config_grid_picks_it(random_matrix, settings):
    matrix = random_matrix(n=150, seed=2)
    grid = [Hyperparameters(algorithm="gbm", n_estimators=5)]

    result = grid_search(matrix, grid, k=3, seed=0, settings=settings)

    assert result.winner_index == 0
    assert result.winner.hyperparameters == grid[0]
    assert len(result.configs[0].folds) == 3


def test_grid_search_is_independent_of_thread_count(random_matrix, settings):
    matrix = random_matrix(n=150, seed=5)
    grid = expand_grid("xgboost", {"n_estimators": [3, 6], "learning_rate": [0.1, 0.5]})

    serial = grid_search(matrix, grid, 3, 1, settings.model_copy(update={"threads": 1}))
    threaded = grid_search(matrix, grid, 3, 1, settings.model_copy(update={"threads": 4}))

    assert serial == threaded
    assert [c.index for c in serial.configs] == [0, 1, 2, 3]


def test_empty_grid_is_an_error(random_matrix, settings):
    with pytest.raises(CrossValidationError):
        grid_search(random_matrix(), [], k=3, seed=0, settings=settings)


def config(index, ba, precision=None) -> ConfigResult:
    folds = [FoldScore(fold=0, n_train=8, n_test=2, balanced_accuracy=ba, precision=precision)]
    return summarize_folds(index, Hyperparameters(algorithm="gbm"), folds)


def test_winner_prefers_combined_then_balanced_accuracy_then_order():
    assert select_winner([config(0, 0.7, 0.7), config(1, 0.6, 0.9)]) == 1
    assert select_winner([config(0, 0.6, 0.8), config(1, 0.8, 0.6)]) == 1
    assert select_winner([config(0, 0.7, 0.7), config(1, 0.7, 0.7)]) == 0
    # an undefined precision never beats a defined one
    assert select_winner([config(0, 0.9), config(1, 0.5, 0.5)]) == 1


def test_undefined_precision_nulls_the_combined_score():
    result = config(0, 0.5)
    assert result.mean_precision is None
    assert result.combined is None


def test_score_predictions_notes_undefined_precision(settings):
    X = np.zeros((4, 1))
    matrix = binary_matrix(X, [True, False, False, False])
    h = expand_grid("ridge", {"C": [1.0]})[0]

    fitted = fit(matrix, h, settings)
    ba, prec, note = score_predictions(fitted, matrix, 0.5)

    assert ba == 0.5
    assert prec is None
    assert "precision" in note
    with pytest.raises(AbsentClassError):
        score_predictions(fitted, binary_matrix(X, [False] * 4), 0.5)


def test_holdout_score(random_matrix, settings):
    train, test = random_matrix(n=200, seed=1), random_matrix(n=80, seed=2)
    h = default_grid("decision_tree", overrides={"criterion": ["gini"], "max_depth": [3]})[0]

    model, ba, prec = holdout_score(train, test, h, settings)

    assert model.algorithm == "decision_tree"
    assert 0.0 <= ba <= 1.0
    assert prec is None or 0.0 <= prec <= 1.0


@pytest.mark.parametrize(
    ("algorithm", "size"),
    [
        ("ridge", 6),
        ("lasso", 6),
        ("elastic_net", 6),
        ("decision_tree", 6),
        ("random_forest", 48),
        ("gbm", 15),
        ("xgboost", 36),
    ],
)
def test_default_grid_sizes(algorithm, size):
    grid = default_grid(algorithm, seed=9)

    assert len(grid) == size
    assert {h.algorithm for h in grid} == {algorithm}
    assert {h.seed for h in grid} == {9}


def test_state_grid_fixes_gamma():
    grid = state_grid()

    assert len(grid) == 12
    assert {h.gamma for h in grid} == {0.0}


def test_expand_grid_varies_the_last_axis_fastest():
    grid = expand_grid("gbm", {"n_estimators": [10, 20], "learning_rate": [0.1, 0.3]})

    assert [(h.n_estimators, h.learning_rate) for h in grid] == [
        (10, 0.1),
        (10, 0.3),
        (20, 0.1),
        (20, 0.3),
    ]


@pytest.mark.parametrize(
    "grid",
    [{}, {"n_estimators": []}, {"not_a_parameter": [1]}, {"gamma": [-1.0]}],
)
def test_expand_grid_rejects_bad_grids(grid):
    with pytest.raises(ConfigError):
        expand_grid("gbm", grid)
