from __future__ import annotations

import numpy as np
import pytest

from conftest import binary_matrix

from clearance.app.errors import ModelError, NotFittedError, SchemaMismatchError
from clearance.app.learners import (
    TreeEnsemble,
    fit,
    fit_decision_tree,
    fit_random_forest,
    load_model,
    predict_proba,
    save_model,
)
from clearance.app.models import Hyperparameters


def xor_matrix(repeats: int = 5):
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * repeats)
    y = X[:, 0] != X[:, 1]
    return binary_matrix(X, y)


def test_decision_tree_separates_clean_labels():
    X = np.array([[0, 3], [0, 1], [1, 2], [1, 0]] * 10)
    matrix = binary_matrix(X, X[:, 0] == 1)

    model = fit_decision_tree(matrix, Hyperparameters(algorithm="decision_tree"))

    proba = predict_proba(model, matrix)
    assert np.all((proba > 0.5) == matrix.labels)
    assert model.trees[0].n_leaves == 2
    assert model.trees[0].threshold[0] == pytest.approx(0.5)


def test_decision_tree_reaches_xor():
    matrix = xor_matrix()

    model = fit_decision_tree(matrix, Hyperparameters(algorithm="decision_tree"))

    assert np.all((predict_proba(model, matrix) > 0.5) == matrix.labels)
    assert model.trees[0].depth() == 2


@pytest.mark.parametrize("depth", [1, 2, 3])
@pytest.mark.parametrize("criterion", ["gini", "entropy"])
def test_max_depth_is_respected(random_matrix, depth, criterion):
    matrix = random_matrix(n=300, p=6, seed=4)
    h = Hyperparameters(algorithm="decision_tree", max_depth=depth, criterion=criterion)

    tree = fit_decision_tree(matrix, h).trees[0]

    assert tree.depth() <= depth
    assert tree.cover[0] == len(matrix)


def test_covers_add_up(random_matrix):
    tree = fit_decision_tree(random_matrix(), Hyperparameters(algorithm="decision_tree")).trees[0]
    internal = np.nonzero(tree.feature >= 0)[0]
    for node in internal:
        assert tree.cover[node] == tree.cover[tree.left[node]] + tree.cover[tree.right[node]]


def test_single_tree_forest_matches_decision_tree(random_matrix, settings):
    matrix = random_matrix(n=250, p=5, seed=9)
    tree = fit_decision_tree(matrix, Hyperparameters(algorithm="decision_tree", max_depth=4))
    forest = fit_random_forest(
        matrix,
        Hyperparameters(
            algorithm="random_forest",
            n_estimators=1,
            max_depth=4,
            bootstrap=False,
            max_features="all",
        ),
        settings,
    )

    assert np.allclose(predict_proba(forest, matrix), predict_proba(tree, matrix))


def test_forest_is_deterministic_across_thread_counts(random_matrix, settings):
    matrix = random_matrix(n=200, p=8, seed=2)
    h = Hyperparameters(algorithm="random_forest", n_estimators=12, max_depth=5, seed=5)

    serial = fit_random_forest(matrix, h, settings.model_copy(update={"threads": 1}))
    threaded = fit_random_forest(matrix, h, settings.model_copy(update={"threads": 4}))

    assert serial.mode == "averaged"
    assert len(serial.trees) == 12
    assert np.array_equal(predict_proba(serial, matrix), predict_proba(threaded, matrix))


def test_fit_dispatches_on_algorithm(random_matrix, settings):
    matrix = random_matrix()
    model = fit(matrix, Hyperparameters(algorithm="decision_tree", max_depth=2), settings)
    assert isinstance(model, TreeEnsemble)
    assert model.algorithm == "decision_tree"


def test_saved_model_predicts_the_same(tmp_path, random_matrix, settings):
    matrix = random_matrix(seed=3)
    model = fit(matrix, Hyperparameters(algorithm="random_forest", n_estimators=5), settings)

    restored = load_model(save_model(model, tmp_path / "model.json"))

    assert np.allclose(predict_proba(restored, matrix), predict_proba(model, matrix))


def test_fit_rejects_bad_input(random_matrix):
    empty = binary_matrix(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ModelError):
        fit_decision_tree(empty, Hyperparameters(algorithm="decision_tree"))
    with pytest.raises(ModelError):
        fit_decision_tree(random_matrix(), Hyperparameters(algorithm="decision_tree", max_depth=0))
    with pytest.raises(ModelError):
        load_model("does/not/exist.json")


def test_prediction_checks_schema(random_matrix):
    model = fit_decision_tree(random_matrix(p=4), Hyperparameters(algorithm="decision_tree"))

    with pytest.raises(SchemaMismatchError):
        predict_proba(model, random_matrix(p=5))
    with pytest.raises(SchemaMismatchError):
        predict_proba(model, np.zeros((3, 5)))


def test_empty_ensemble_is_not_fitted(random_matrix):
    model = fit_decision_tree(random_matrix(), Hyperparameters(algorithm="decision_tree"))
    hollow = TreeEnsemble(
        algorithm=model.algorithm,
        trees=(),
        base_score=0.0,
        learning_rate=1.0,
        mode="boosted",
        schema_digest=model.schema_digest,
        hyperparameters=model.hyperparameters,
        n_features=model.n_features,
    )

    with pytest.raises(NotFittedError):
        predict_proba(hollow, np.zeros((1, model.n_features)))
