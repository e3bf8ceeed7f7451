from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import Settings, get_settings
from .dataset import Dataset, SplitPair, shuffled_split
from .errors import ClearanceError, MetricError
from .features import FeatureMatrix, FeatureSchema, OverlapIndex, encode, fit_schema
from .learners import Model, default_grid, fit
from .models import AlgorithmSummary, GridResult, Hyperparameters, StateResult, SweepResult
from .validation import grid_search, holdout_score, score_predictions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitMatrices:
    split: SplitPair
    schema: FeatureSchema
    train: FeatureMatrix
    test: FeatureMatrix


@dataclass(frozen=True)
class StateFit:
    matrices: SplitMatrices
    grid: GridResult
    model: Model


def encode_split(
    d: Dataset,
    train_fraction: float,
    seed: int,
    settings: Optional[Settings] = None,
    exclude: Iterable[str] = (),
) -> SplitMatrices:
    """Shuffle-split ``d``, fit the schema on the training part and encode both parts.

    The monthly overlap flag is computed over all of ``d``.
    """
    settings = settings or get_settings()
    split = shuffled_split(d, train_fraction, seed)
    schema = fit_schema(split.train, settings, exclude=exclude)
    overlap = OverlapIndex(d.records)
    return SplitMatrices(
        split=split,
        schema=schema,
        train=encode(split.train, schema, overlap),
        test=encode(split.test, schema, overlap),
    )


def compare_algorithms(
    train: FeatureMatrix,
    test: FeatureMatrix,
    algorithms: Sequence[str],
    k: int,
    seed: int,
    settings: Optional[Settings] = None,
    overrides: Optional[Mapping[str, Sequence]] = None,
) -> Tuple[List[AlgorithmSummary], Dict[str, GridResult]]:
    """Grid-search each algorithm family and score its refit winner on the test split."""
    settings = settings or get_settings()
    summaries: List[AlgorithmSummary] = []
    results: Dict[str, GridResult] = {}
    for algorithm in algorithms:
        grid = default_grid(algorithm, seed=seed, overrides=overrides)
        result = grid_search(train, grid, k, seed, settings)
        winner = result.winner
        _, test_ba, test_prec = holdout_score(train, test, winner.hyperparameters, settings)
        results[algorithm] = result
        summaries.append(
            AlgorithmSummary(
                algorithm=algorithm,
                configs_tested=len(grid),
                best=winner.hyperparameters,
                cv_balanced_accuracy=winner.mean_balanced_accuracy,
                cv_balanced_accuracy_sd=winner.sd_balanced_accuracy,
                cv_precision=winner.mean_precision,
                cv_precision_sd=winner.sd_precision,
                test_balanced_accuracy=test_ba,
                test_precision=test_prec,
            )
        )
        logger.info(
            "%s: best %s, test balanced accuracy %.3f",
            algorithm,
            winner.hyperparameters.label(),
            test_ba,
        )
    return summaries, results


def _skip_reason(labels: np.ndarray, k: int) -> Optional[str]:
    positives = int(labels.sum())
    negatives = int(labels.size - positives)
    if positives == 0 or negatives == 0:
        return "single class in training split"
    if min(positives, negatives) < k:
        return f"a class has fewer than k={k} training rows"
    return None


def metric_correlation(states: Sequence[StateResult]) -> Optional[float]:
    """Pearson correlation of test balanced accuracy and test precision across states."""
    pairs = [
        (s.test_balanced_accuracy, s.test_precision)
        for s in states
        if s.test_balanced_accuracy is not None and s.test_precision is not None
    ]
    if len(pairs) < 3:
        return None
    values = np.array(pairs, dtype=np.float64)
    if np.any(values.std(axis=0) == 0.0):
        return None
    return float(np.corrcoef(values[:, 0], values[:, 1])[0, 1])


def _sweep_state(
    state: str,
    d: Dataset,
    grid: Sequence[Hyperparameters],
    k: int,
    seed: int,
    train_fraction: float,
    settings: Settings,
) -> Tuple[StateResult, Optional[StateFit]]:
    if len(d) < 2:
        return StateResult(state=state, skipped_reason="fewer than 2 records"), None
    matrices = encode_split(d, train_fraction, seed, settings)
    reason = _skip_reason(matrices.train.labels, k)
    if reason is not None:
        result = StateResult(
            state=state,
            n_train=len(matrices.train),
            n_test=len(matrices.test),
            skipped_reason=reason,
        )
        return result, None

    result = grid_search(matrices.train, grid, k, seed, settings)
    winner = result.winner
    model = fit(matrices.train, winner.hyperparameters, settings)
    test_ba: Optional[float] = None
    test_prec: Optional[float] = None
    try:
        test_ba, test_prec, note = score_predictions(
            model, matrices.test, settings.positive_threshold
        )
    except MetricError as err:
        note = str(err)
    if note:
        note = f"test split: {note}"

    state_result = StateResult(
        state=state,
        n_train=len(matrices.train),
        n_test=len(matrices.test),
        best=winner.hyperparameters,
        cv_balanced_accuracy=winner.mean_balanced_accuracy,
        cv_precision=winner.mean_precision,
        test_balanced_accuracy=test_ba,
        test_precision=test_prec,
        configs_evaluated=len(grid),
        note=note,
    )
    return state_result, StateFit(matrices=matrices, grid=result, model=model)


def state_sweep_detailed(
    partitions: Mapping[str, Dataset],
    grid: Sequence[Hyperparameters],
    k: int,
    seed: int,
    settings: Optional[Settings] = None,
    train_fraction: Optional[float] = None,
) -> Tuple[SweepResult, Dict[str, StateFit]]:
    """Per-state grid search, refit and test scoring; also returns the fitted states."""
    settings = settings or get_settings()
    fraction = train_fraction if train_fraction is not None else settings.train_fraction
    states: List[StateResult] = []
    fits: Dict[str, StateFit] = {}
    for state in sorted(partitions):
        try:
            result, state_fit = _sweep_state(
                state, partitions[state], grid, k, seed, fraction, settings
            )
        except ClearanceError as err:
            result, state_fit = StateResult(state=state, skipped_reason=str(err)), None
        if result.skipped_reason:
            logger.warning("skipping state %s: %s", state, result.skipped_reason)
        states.append(result)
        if state_fit is not None:
            fits[state] = state_fit

    sweep = SweepResult(
        states=states,
        models_fitted=sum(s.configs_evaluated for s in states),
        metric_correlation=metric_correlation(states),
    )
    logger.info(
        "state sweep: %d states, %d evaluated, %d configurations",
        len(states),
        len(fits),
        sweep.models_fitted,
    )
    return sweep, fits


def state_sweep(
    partitions: Mapping[str, Dataset],
    grid: Sequence[Hyperparameters],
    k: int,
    seed: int,
    settings: Optional[Settings] = None,
    train_fraction: Optional[float] = None,
) -> SweepResult:
    sweep, _ = state_sweep_detailed(partitions, grid, k, seed, settings, train_fraction)
    return sweep


__all__ = [
    "SplitMatrices",
    "StateFit",
    "compare_algorithms",
    "encode_split",
    "metric_correlation",
    "state_sweep",
    "state_sweep_detailed",
]
