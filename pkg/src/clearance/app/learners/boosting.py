from __future__ import annotations

import logging
from typing import Iterator, Optional

import numpy as np
from scipy.special import expit, logit

from ..config import Settings, get_settings
from ..errors import ModelError
from ..features import FeatureMatrix
from ..models import Hyperparameters
from .base import Tree, TreeEnsemble, design_values
from .tree import MIN_GAIN, BinnedMatrix, GrowthPolicy, check_depth, check_matrix, grow_tree

logger = logging.getLogger(__name__)

BASE_RATE_CLIP = 1e-6
HESSIAN_CLIP = 1e-15
MAX_HALVINGS = 60


def log_loss_terms(y: np.ndarray, margin: np.ndarray) -> np.ndarray:
    """Per-row logistic loss, computed stably from the margin."""
    return np.logaddexp(0.0, margin) - y * margin


def base_score_of(y: np.ndarray) -> float:
    rate = float(np.clip(np.mean(y), BASE_RATE_CLIP, 1.0 - BASE_RATE_CLIP))
    return float(logit(rate))


def _probabilities(margin: np.ndarray) -> np.ndarray:
    return np.clip(expit(margin), HESSIAN_CLIP, 1.0 - HESSIAN_CLIP)


class ResidualPolicy(GrowthPolicy):
    """First-order boosting: least-squares trees on y - p, Newton leaf values.

    stats: (count, residual, hessian).
    """

    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def gain(self, left: np.ndarray, right: np.ndarray, total: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (
                left[:, 1] ** 2 / left[:, 0]
                + right[:, 1] ** 2 / right[:, 0]
                - total[1] ** 2 / total[0]
            )

    def accept(self, gain: float) -> bool:
        return gain > MIN_GAIN

    def leaf_value(self, total: np.ndarray) -> float:
        return self.learning_rate * float(total[1]) / max(float(total[2]), HESSIAN_CLIP)


class SecondOrderPolicy(GrowthPolicy):
    """Regularized second-order boosting. stats: (count, gradient, hessian); cover is the
    hessian sum."""

    def __init__(self, learning_rate: float, reg_lambda: float, gamma: float) -> None:
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.gamma = gamma

    def gain(self, left: np.ndarray, right: np.ndarray, total: np.ndarray) -> np.ndarray:
        lam = self.reg_lambda
        return (
            0.5
            * (
                left[:, 1] ** 2 / (left[:, 2] + lam)
                + right[:, 1] ** 2 / (right[:, 2] + lam)
                - total[1] ** 2 / (total[2] + lam)
            )
            - self.gamma
        )

    def accept(self, gain: float) -> bool:
        return gain > 0.0

    def leaf_value(self, total: np.ndarray) -> float:
        return -self.learning_rate * float(total[1]) / (float(total[2]) + self.reg_lambda)

    def cover(self, total: np.ndarray) -> float:
        return float(total[2])


def damp_leaves(tree: Tree, X: np.ndarray, y: np.ndarray, margin: np.ndarray) -> Tree:
    """Halve any leaf step that would raise the training loss of the rows in that leaf."""
    leaves = tree.apply(X)
    values = tree.value.copy()
    for leaf in np.unique(leaves):
        members = leaves == leaf
        y_leaf, m_leaf = y[members], margin[members]
        before = log_loss_terms(y_leaf, m_leaf).sum()
        step = float(values[leaf])
        for _ in range(MAX_HALVINGS):
            if log_loss_terms(y_leaf, m_leaf + step).sum() <= before:
                break
            step /= 2.0
        else:
            step = 0.0
        if step != values[leaf]:
            logger.debug("damped leaf %d step %.6g -> %.6g", leaf, values[leaf], step)
        values[leaf] = step
    return Tree(tree.feature, tree.threshold, tree.left, tree.right, values, tree.cover)


def _check_boosting(h: Hyperparameters) -> None:
    if h.n_estimators < 1:
        raise ModelError(f"n_estimators must be at least 1, got {h.n_estimators}")
    if not 0.0 < h.learning_rate <= 1.0:
        raise ModelError(f"learning_rate must lie in (0, 1], got {h.learning_rate}")
    check_depth(h.max_depth)


def _fit_boosted(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Settings,
    second_order: bool,
) -> TreeEnsemble:
    check_matrix(matrix)
    _check_boosting(h)
    depth = h.max_depth if h.max_depth is not None else settings.boosted_max_depth
    reg_lambda = h.reg_lambda if h.reg_lambda is not None else settings.reg_lambda
    if second_order:
        policy: GrowthPolicy = SecondOrderPolicy(h.learning_rate, reg_lambda, h.gamma)
    else:
        policy = ResidualPolicy(h.learning_rate)

    X = matrix.values
    y = matrix.labels.astype(np.float64)
    binned = BinnedMatrix(X)
    rows = np.arange(len(matrix))
    ones = np.ones_like(y)
    base = base_score_of(y)
    margin = np.full(y.shape[0], base, dtype=np.float64)

    trees = []
    for stage in range(h.n_estimators):
        p = _probabilities(margin)
        hessian = p * (1.0 - p)
        if second_order:
            stats = np.column_stack([ones, p - y, hessian])
        else:
            stats = np.column_stack([ones, y - p, hessian])
        tree = grow_tree(binned, rows, stats, policy, depth)
        tree = damp_leaves(tree, X, y, margin)
        margin = margin + tree.predict(X)
        trees.append(tree)
        if logger.isEnabledFor(logging.DEBUG):
            loss = float(log_loss_terms(y, margin).mean())
            logger.debug("stage %d: %d leaves, train log-loss %.6f", stage, tree.n_leaves, loss)

    return TreeEnsemble(
        algorithm="xgboost" if second_order else "gbm",
        trees=tuple(trees),
        base_score=base,
        learning_rate=h.learning_rate,
        mode="boosted",
        schema_digest=matrix.schema.digest(),
        hyperparameters=h,
        n_features=matrix.n_features,
    )


def fit_gbm(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> TreeEnsemble:
    return _fit_boosted(matrix, h, settings or get_settings(), second_order=False)


def fit_xgboost(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> TreeEnsemble:
    return _fit_boosted(matrix, h, settings or get_settings(), second_order=True)


def staged_margins(model: TreeEnsemble, x) -> Iterator[np.ndarray]:
    """Margins after each boosting stage, starting from the base score alone."""
    if model.mode != "boosted":
        raise ModelError("staged margins need a boosted ensemble")
    values = design_values(model, x)
    margin = np.full(values.shape[0], model.base_score, dtype=np.float64)
    yield margin.copy()
    for tree in model.trees:
        margin += tree.predict(values)
        yield margin.copy()


__all__ = [
    "ResidualPolicy",
    "SecondOrderPolicy",
    "base_score_of",
    "damp_leaves",
    "fit_gbm",
    "fit_xgboost",
    "log_loss_terms",
    "staged_margins",
]
