from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from ..config import Settings, get_settings
from ..errors import ModelError
from ..features import FeatureMatrix
from ..models import Hyperparameters
from .base import Tree, TreeEnsemble
from .tree import BinnedMatrix, ClassificationPolicy, check_depth, check_matrix, grow_tree

logger = logging.getLogger(__name__)


def _grow_member(
    binned: BinnedMatrix,
    y: np.ndarray,
    h: Hyperparameters,
    seed_seq: np.random.SeedSequence,
    n_candidates: int,
) -> Tree:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    n = y.shape[0]
    if h.bootstrap:
        weights = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
    else:
        weights = np.ones(n, dtype=np.float64)
    rows = np.nonzero(weights)[0]
    stats = np.column_stack([weights, weights * y])
    p = binned.n_features

    sampler = None
    if n_candidates < p:
        def sampler() -> list[int]:
            return sorted(int(j) for j in rng.choice(p, size=n_candidates, replace=False))

    return grow_tree(binned, rows, stats, ClassificationPolicy(h.criterion), h.max_depth, sampler)


def fit_random_forest(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> TreeEnsemble:
    """Bagged CART trees with per-split feature subsampling; probabilities are averaged.

    Every tree draws from its own Philox stream spawned from ``h.seed``, so the fit does
    not depend on thread scheduling.
    """
    settings = settings or get_settings()
    check_matrix(matrix)
    check_depth(h.max_depth)
    if h.n_estimators < 1:
        raise ModelError(f"n_estimators must be at least 1, got {h.n_estimators}")

    binned = BinnedMatrix(matrix.values)
    y = matrix.labels.astype(np.float64)
    p = matrix.n_features
    max_features = h.max_features or "sqrt"
    n_candidates = p if max_features == "all" else max(1, int(math.sqrt(p)))
    children = np.random.SeedSequence(h.seed).spawn(h.n_estimators)

    workers = min(settings.threads or os.cpu_count() or 1, h.n_estimators)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = tuple(
                pool.map(lambda s: _grow_member(binned, y, h, s, n_candidates), children)
            )
    else:
        trees = tuple(_grow_member(binned, y, h, s, n_candidates) for s in children)

    logger.debug("random forest: %d trees, %d leaves", len(trees), sum(t.n_leaves for t in trees))
    return TreeEnsemble(
        algorithm="random_forest",
        trees=trees,
        base_score=0.0,
        learning_rate=1.0,
        mode="averaged",
        schema_digest=matrix.schema.digest(),
        hyperparameters=h,
        n_features=p,
    )


__all__ = ["fit_random_forest"]
