from __future__ import annotations

import numpy as np
import pytest
from scipy.special import logit

from conftest import binary_matrix

from clearance.app.errors import ModelError
from clearance.app.learners import (
    fit_decision_tree,
    fit_gbm,
    fit_random_forest,
    fit_xgboost,
    predict_margin,
)
from clearance.app.learners.boosting import log_loss_terms, staged_margins
from clearance.app.models import Hyperparameters


def two_points():
    return binary_matrix(np.array([[0.0], [1.0]]), np.array([False, True]))


@pytest.mark.parametrize("fitter, algorithm", [(fit_gbm, "gbm"), (fit_xgboost, "xgboost")])
def test_training_loss_never_rises(random_matrix, settings, fitter, algorithm):
    matrix = random_matrix(n=300, p=6, seed=8)
    h = Hyperparameters(algorithm=algorithm, n_estimators=25, learning_rate=0.5, max_depth=3)

    model = fitter(matrix, h, settings)

    y = matrix.labels.astype(float)
    losses = [log_loss_terms(y, m).mean() for m in staged_margins(model, matrix)]
    assert len(losses) == 26
    for before, after in zip(losses, losses[1:]):
        assert after <= before + 1e-12


def test_xgboost_leaf_values_on_two_points(settings):
    h = Hyperparameters(algorithm="xgboost", n_estimators=1, learning_rate=1.0, reg_lambda=1.0)

    model = fit_xgboost(two_points(), h, settings)

    # base 0, gradients -/+0.5, hessians 0.25: leaves are -G/(H + lambda)
    assert model.base_score == pytest.approx(0.0)
    assert predict_margin(model, np.array([[0.0], [1.0]])) == pytest.approx([-0.4, 0.4])
    assert model.trees[0].cover[0] == pytest.approx(0.5)


def test_gbm_leaf_values_on_two_points(settings):
    h = Hyperparameters(algorithm="gbm", n_estimators=1, learning_rate=1.0)

    model = fit_gbm(two_points(), h, settings)

    assert predict_margin(model, np.array([[0.0], [1.0]])) == pytest.approx([-2.0, 2.0])


def test_learning_rate_scales_leaves(settings):
    h = Hyperparameters(algorithm="xgboost", n_estimators=1, learning_rate=0.25, reg_lambda=1.0)

    model = fit_xgboost(two_points(), h, settings)

    assert predict_margin(model, np.array([[0.0], [1.0]])) == pytest.approx([-0.1, 0.1])


def test_larger_gamma_never_grows_more_leaves(random_matrix, settings):
    matrix = random_matrix(n=400, p=6, seed=12)
    leaves = []
    for gamma in (0.0, 0.5, 1.0, 5.0, 50.0):
        h = Hyperparameters(algorithm="xgboost", n_estimators=1, learning_rate=0.3, gamma=gamma)
        leaves.append(fit_xgboost(matrix, h, settings).n_leaves)

    assert leaves == sorted(leaves, reverse=True)
    assert leaves[-1] == 1


def test_base_score_is_training_log_odds(random_matrix, settings):
    matrix = random_matrix(seed=6)
    model = fit_gbm(matrix, Hyperparameters(algorithm="gbm", n_estimators=2), settings)

    assert model.base_score == pytest.approx(logit(matrix.labels.mean()))


def test_single_class_training_set(settings):
    matrix = binary_matrix(np.array([[0.0], [1.0], [2.0]]), np.array([True, True, True]))

    model = fit_xgboost(matrix, Hyperparameters(algorithm="xgboost", n_estimators=3), settings)

    assert np.all(np.isfinite(predict_margin(model, matrix)))
    assert np.all(predict_margin(model, matrix) > 0)


def test_boosting_rejects_bad_hyperparameters(random_matrix, settings):
    matrix = random_matrix()
    with pytest.raises(ModelError):
        fit_gbm(matrix, Hyperparameters(algorithm="gbm", learning_rate=0.0), settings)
    with pytest.raises(ModelError):
        fit_xgboost(matrix, Hyperparameters(algorithm="xgboost", n_estimators=0), settings)


def test_staged_margins_need_a_boosted_model(random_matrix, settings):
    matrix = random_matrix()
    tree = fit_decision_tree(matrix, Hyperparameters(algorithm="decision_tree", max_depth=2))
    stages = list(staged_margins(tree, matrix))
    assert np.allclose(stages[-1], predict_margin(tree, matrix))

    forest = Hyperparameters(algorithm="random_forest", n_estimators=2)
    with pytest.raises(ModelError):
        list(staged_margins(fit_random_forest(matrix, forest, settings), matrix))
