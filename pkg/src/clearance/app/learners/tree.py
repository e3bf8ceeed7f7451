from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..config import Settings
from ..errors import ModelError
from ..features import FeatureMatrix
from ..models import Hyperparameters
from .base import LEAF, Tree, TreeEnsemble

logger = logging.getLogger(__name__)

# Gains at or below this are treated as no improvement for regression-style splits.
MIN_GAIN = 1e-12


class BinnedMatrix:
    """Per-column sorted distinct values and the integer code of every cell.

    Split search runs on these codes; thresholds are midpoints between consecutive
    distinct values present at a node.
    """

    def __init__(self, values: np.ndarray) -> None:
        if values.ndim != 2:
            raise ModelError("design matrix must be two-dimensional")
        self.n_rows, self.n_features = values.shape
        self.levels: List[np.ndarray] = []
        # Stored column-major so per-feature gathers are contiguous
        self.codes = np.empty((self.n_features, self.n_rows), dtype=np.int32)
        for j in range(self.n_features):
            column = values[:, j].astype(np.float64)
            levels = np.unique(column)
            self.levels.append(levels)
            self.codes[j] = np.searchsorted(levels, column)


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float


class GrowthPolicy:
    """Learner-specific pieces of tree growth.

    ``stats`` holds one row of additive statistics per training row; column 0 is
    always the row weight.
    """

    def can_split(self, total: np.ndarray) -> bool:
        return True

    def gain(self, left: np.ndarray, right: np.ndarray, total: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def accept(self, gain: float) -> bool:
        return True

    def leaf_value(self, total: np.ndarray) -> float:
        raise NotImplementedError

    def cover(self, total: np.ndarray) -> float:
        return float(total[0])


def _impurity(weight: np.ndarray, positive: np.ndarray, criterion: str) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(weight > 0, positive / np.where(weight > 0, weight, 1.0), 0.0)
    p = np.clip(p, 0.0, 1.0)
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


class ClassificationPolicy(GrowthPolicy):
    """CART on gini or entropy; stats are (weight, weighted positives).

    Impure nodes always split on the best candidate, even at zero gain, so that
    patterns like XOR are reachable.
    """

    def __init__(self, criterion: str = "gini") -> None:
        if criterion not in ("gini", "entropy"):
            raise ModelError(f"unknown split criterion {criterion!r}")
        self.criterion = criterion

    def can_split(self, total: np.ndarray) -> bool:
        weight, positive = total[0], total[1]
        return bool(positive > 0 and weight - positive > 0)

    def gain(self, left: np.ndarray, right: np.ndarray, total: np.ndarray) -> np.ndarray:
        parent = total[0] * _impurity(np.asarray(total[0]), np.asarray(total[1]), self.criterion)
        return (
            parent
            - left[:, 0] * _impurity(left[:, 0], left[:, 1], self.criterion)
            - right[:, 0] * _impurity(right[:, 0], right[:, 1], self.criterion)
        )

    def leaf_value(self, total: np.ndarray) -> float:
        # Laplace-smoothed class log-odds
        positive = total[1]
        negative = total[0] - total[1]
        return float(np.log((positive + 1.0) / (negative + 1.0)))


def find_best_split(
    binned: BinnedMatrix,
    rows: np.ndarray,
    stats: np.ndarray,
    features: Sequence[int],
    policy: GrowthPolicy,
) -> Optional[SplitCandidate]:
    """Exhaustive search over the given features.

    Ties keep the lowest feature index, then the lowest threshold.
    """
    node_stats = stats[rows]
    total = node_stats.sum(axis=0)
    best: Optional[SplitCandidate] = None
    best_bin = -1
    best_presence: Optional[np.ndarray] = None
    n_node = rows.shape[0]
    m = stats.shape[1]
    for j in sorted(features):
        n_bins = binned.levels[j].shape[0]
        if n_bins < 2:
            continue
        codes = binned.codes[j][rows]
        presence = np.bincount(codes, minlength=n_bins)
        if np.count_nonzero(presence) < 2:
            continue
        hist = np.empty((n_bins, m), dtype=np.float64)
        for s in range(m):
            hist[:, s] = np.bincount(codes, weights=node_stats[:, s], minlength=n_bins)
        left = np.cumsum(hist, axis=0)
        right = left[-1] - left
        count_left = np.cumsum(presence)
        valid = (presence > 0) & (count_left < n_node)
        gains = policy.gain(left, right, total)
        gains = np.where(valid, gains, -np.inf)
        b = int(np.argmax(gains))
        gain = float(gains[b])
        if not np.isfinite(gain):
            continue
        if best is None or gain > best.gain:
            best = SplitCandidate(feature=j, threshold=0.0, gain=gain)
            best_bin = b
            best_presence = presence
    if best is None:
        return None
    levels = binned.levels[best.feature]
    upper = best_bin + 1 + int(np.nonzero(best_presence[best_bin + 1 :])[0][0])
    threshold = (float(levels[best_bin]) + float(levels[upper])) / 2.0
    return SplitCandidate(feature=best.feature, threshold=threshold, gain=best.gain)


FeatureSampler = Callable[[], Sequence[int]]


def grow_tree(
    binned: BinnedMatrix,
    rows: np.ndarray,
    stats: np.ndarray,
    policy: GrowthPolicy,
    max_depth: Optional[int] = None,
    feature_sampler: Optional[FeatureSampler] = None,
) -> Tree:
    """Grow one tree depth-first. ``feature_sampler`` draws the candidate features of
    each split; when none of them can split an impure node all features are tried."""
    if rows.size == 0:
        raise ModelError("cannot grow a tree on zero rows")
    all_features = list(range(binned.n_features))
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    cover: List[float] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        total = stats[node_rows].sum(axis=0)
        cover[node] = policy.cover(total)
        split: Optional[SplitCandidate] = None
        if (max_depth is None or depth < max_depth) and policy.can_split(total):
            candidates = feature_sampler() if feature_sampler is not None else all_features
            split = find_best_split(binned, node_rows, stats, candidates, policy)
            if split is None and feature_sampler is not None:
                split = find_best_split(binned, node_rows, stats, all_features, policy)
            if split is not None and not policy.accept(split.gain):
                split = None
        if split is None:
            value[node] = policy.leaf_value(total)
            continue
        level = binned.levels[split.feature]
        goes_left = level[binned.codes[split.feature][node_rows]] < split.threshold
        left_id, right_id = new_node(), new_node()
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = left_id
        right[node] = right_id
        stack.append((right_id, node_rows[~goes_left], depth + 1))
        stack.append((left_id, node_rows[goes_left], depth + 1))

    _sum_covers(feature, left, right, cover)
    return Tree.from_lists(feature, threshold, left, right, value, cover)


def _sum_covers(feature: List[int], left: List[int], right: List[int], cover: List[float]) -> None:
    # Children always have larger ids than their parent.
    for node in range(len(feature) - 1, -1, -1):
        if feature[node] != LEAF:
            cover[node] = cover[left[node]] + cover[right[node]]


def check_matrix(matrix: FeatureMatrix) -> None:
    if len(matrix) == 0:
        raise ModelError("cannot fit on an empty feature matrix")
    if not np.all(np.isfinite(matrix.values)):
        raise ModelError("feature matrix contains non-finite values")


def check_depth(max_depth: Optional[int]) -> None:
    if max_depth is not None and max_depth < 1:
        raise ModelError(f"max_depth must be at least 1, got {max_depth}")


def fit_decision_tree(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> TreeEnsemble:
    check_matrix(matrix)
    check_depth(h.max_depth)
    binned = BinnedMatrix(matrix.values)
    y = matrix.labels.astype(np.float64)
    stats = np.column_stack([np.ones_like(y), y])
    rows = np.arange(len(matrix))
    tree = grow_tree(binned, rows, stats, ClassificationPolicy(h.criterion), h.max_depth)
    logger.debug("decision tree: %d leaves, depth %d", tree.n_leaves, tree.depth())
    return TreeEnsemble(
        algorithm="decision_tree",
        trees=(tree,),
        base_score=0.0,
        learning_rate=1.0,
        mode="boosted",
        schema_digest=matrix.schema.digest(),
        hyperparameters=h,
        n_features=matrix.n_features,
    )


__all__ = [
    "BinnedMatrix",
    "ClassificationPolicy",
    "GrowthPolicy",
    "SplitCandidate",
    "check_depth",
    "check_matrix",
    "find_best_split",
    "fit_decision_tree",
    "grow_tree",
]
