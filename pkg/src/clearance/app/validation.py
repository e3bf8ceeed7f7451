from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import Settings, get_settings
from .errors import CrossValidationError, UndefinedMetricError
from .features import FeatureMatrix
from .learners import Model, fit, predict_proba
from .metrics import balanced_accuracy, confusion, precision
from .models import ConfigResult, FoldScore, GridResult, Hyperparameters

logger = logging.getLogger(__name__)


def stratified_kfold(labels: Sequence[bool] | np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row.

    Each class (False before True) is shuffled with a Philox stream keyed by ``seed``
    and dealt round-robin over the folds, continuing from where the previous class
    stopped so fold sizes stay within one of each other.
    """
    y = np.asarray(labels, dtype=bool)
    if k < 2:
        raise CrossValidationError(f"k must be at least 2, got {k}")
    if seed < 0:
        raise CrossValidationError(f"seed must be non-negative, got {seed}")
    rng = np.random.Generator(np.random.Philox(seed))
    folds = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for cls in (False, True):
        members = np.nonzero(y == cls)[0]
        if members.size == 0:
            continue
        if members.size < k:
            name = "solved" if cls else "unsolved"
            raise CrossValidationError(
                f"class {name} has {members.size} rows, fewer than k={k} folds"
            )
        shuffled = members[rng.permutation(members.size)]
        folds[shuffled] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return folds


def fold_indices(folds: np.ndarray, k: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    return [(np.nonzero(folds != f)[0], np.nonzero(folds == f)[0]) for f in range(k)]


def score_predictions(
    model: Model, matrix: FeatureMatrix, threshold: float
) -> Tuple[float, Optional[float], Optional[str]]:
    """(balanced accuracy, precision or None, note) of thresholded probabilities."""
    predicted = predict_proba(model, matrix) >= threshold
    matrix_confusion = confusion(predicted, matrix.labels)
    ba = balanced_accuracy(matrix_confusion)
    try:
        return ba, precision(matrix_confusion), None
    except UndefinedMetricError as err:
        return ba, None, str(err)


def _evaluate_fold(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    fold: int,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    settings: Settings,
) -> FoldScore:
    model = fit(matrix.subset(train_idx), h, settings)
    ba, prec, note = score_predictions(model, matrix.subset(test_idx), settings.positive_threshold)
    if note:
        logger.info("%s fold %d: %s", h.label(), fold, note)
    return FoldScore(
        fold=fold,
        n_train=int(train_idx.size),
        n_test=int(test_idx.size),
        balanced_accuracy=ba,
        precision=prec,
        note=note,
    )


def summarize_folds(index: int, h: Hyperparameters, folds: List[FoldScore]) -> ConfigResult:
    ba = np.array([f.balanced_accuracy for f in folds])
    precisions = [f.precision for f in folds]
    mean_ba = float(ba.mean())
    if any(p is None for p in precisions):
        mean_prec = sd_prec = combined = None
    else:
        values = np.array(precisions, dtype=np.float64)
        mean_prec = float(values.mean())
        sd_prec = float(values.std())
        combined = (mean_ba + mean_prec) / 2.0
    return ConfigResult(
        index=index,
        hyperparameters=h,
        folds=folds,
        mean_balanced_accuracy=mean_ba,
        sd_balanced_accuracy=float(ba.std()),
        mean_precision=mean_prec,
        sd_precision=sd_prec,
        combined=combined,
    )


def _workers(settings: Settings) -> int:
    return max(1, settings.threads or os.cpu_count() or 1)


def cross_validate(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    k: int,
    seed: int,
    settings: Optional[Settings] = None,
) -> ConfigResult:
    settings = settings or get_settings()
    folds = stratified_kfold(matrix.labels, k, seed)
    scores = [
        _evaluate_fold(matrix, h, f, train_idx, test_idx, settings)
        for f, (train_idx, test_idx) in enumerate(fold_indices(folds, k))
    ]
    return summarize_folds(0, h, scores)


def select_winner(configs: Sequence[ConfigResult]) -> int:
    """Highest combined score, then highest balanced accuracy, then first declared."""

    def key(c: ConfigResult):
        combined = c.combined if c.combined is not None else -np.inf
        return (combined, c.mean_balanced_accuracy, -c.index)

    return max(configs, key=key).index


def grid_search(
    matrix: FeatureMatrix,
    grid: Sequence[Hyperparameters],
    k: int,
    seed: int,
    settings: Optional[Settings] = None,
) -> GridResult:
    """Cross-validate every configuration on shared folds.

    Configuration-fold pairs run concurrently; results are reassembled in declaration
    order, so the outcome does not depend on completion order.
    """
    settings = settings or get_settings()
    if not grid:
        raise CrossValidationError("hyperparameter grid is empty")
    folds = stratified_kfold(matrix.labels, k, seed)
    splits = fold_indices(folds, k)
    tasks = [(i, f) for i in range(len(grid)) for f in range(k)]

    def run(task: Tuple[int, int]) -> FoldScore:
        i, f = task
        train_idx, test_idx = splits[f]
        return _evaluate_fold(matrix, grid[i], f, train_idx, test_idx, settings)

    workers = min(_workers(settings), len(tasks))
    logger.info("grid search: %d configurations x %d folds on %d rows", len(grid), k, len(matrix))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(run, tasks))
    else:
        scores = [run(t) for t in tasks]

    configs = [summarize_folds(i, h, scores[i * k : (i + 1) * k]) for i, h in enumerate(grid)]
    winner = select_winner(configs)
    logger.info("grid winner: %s", grid[winner].label())
    return GridResult(k=k, seed=seed, configs=configs, winner_index=winner)


def holdout_score(
    train: FeatureMatrix,
    test: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> Tuple[Model, float, Optional[float]]:
    """Refit on the full training split and score the test split once."""
    settings = settings or get_settings()
    model = fit(train, h, settings)
    ba, prec, _ = score_predictions(model, test, settings.positive_threshold)
    return model, ba, prec


__all__ = [
    "cross_validate",
    "fold_indices",
    "grid_search",
    "holdout_score",
    "score_predictions",
    "select_winner",
    "stratified_kfold",
    "summarize_folds",
]
