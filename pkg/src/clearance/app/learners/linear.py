from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from ..config import Settings, get_settings
from ..errors import ModelError
from ..features import FeatureMatrix
from ..models import Hyperparameters
from .base import LinearModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Penalty:
    """(1/C) * [l1 * ||w||_1 + l2 / 2 * ||w||^2]; the intercept is never penalized."""

    l1: float
    l2: float

    @classmethod
    def of(cls, kind: str, C: float, l1_ratio: float = 0.5) -> "Penalty":
        if C <= 0:
            raise ModelError(f"C must be positive, got {C}")
        if kind == "l2":
            return cls(0.0, 1.0 / C)
        if kind == "l1":
            return cls(1.0 / C, 0.0)
        if kind == "elasticnet":
            if not 0.0 <= l1_ratio <= 1.0:
                raise ModelError(f"l1_ratio must lie in [0, 1], got {l1_ratio}")
            return cls(l1_ratio / C, (1.0 - l1_ratio) / C)
        raise ModelError(f"unknown penalty {kind!r}")


def smooth_objective(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, penalty: Penalty
) -> float:
    """Mean logistic loss plus the L2 part of the penalty."""
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss + 0.5 * penalty.l2 * float(w @ w)


def smooth_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, penalty: Penalty
) -> Tuple[np.ndarray, float]:
    residual = expit(X @ w + b) - y
    n = X.shape[0]
    grad_w = X.T @ residual / n + penalty.l2 * w
    grad_b = float(residual.sum() / n)
    return grad_w, grad_b


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, penalty: Penalty) -> float:
    return smooth_objective(w, b, X, y, penalty) + penalty.l1 * float(np.abs(w).sum())


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fit_penalized_logistic(
    matrix: FeatureMatrix,
    h: Hyperparameters,
    settings: Optional[Settings] = None,
) -> LinearModel:
    """Proximal gradient descent with backtracking line search.

    With no L1 part the proximal step is the identity, so the L2 case reduces to plain
    gradient descent with the same line search. Stops when the objective changes by
    less than ``settings.linear_tol``.
    """
    settings = settings or get_settings()
    if h.penalty is None:
        raise ModelError(f"{h.algorithm} is not a penalized logistic model")
    penalty = Penalty.of(h.penalty, h.C, h.l1_ratio)
    if len(matrix) == 0:
        raise ModelError("cannot fit on an empty feature matrix")
    X = np.asarray(matrix.values, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ModelError("feature matrix contains non-finite values")
    y = matrix.labels.astype(np.float64)

    w = np.zeros(X.shape[1], dtype=np.float64)
    b = 0.0
    current = objective(w, b, X, y, penalty)
    step = 1.0
    converged = False
    iteration = 0
    for iteration in range(1, settings.linear_max_iter + 1):
        grad_w, grad_b = smooth_gradient(w, b, X, y, penalty)
        smooth_now = smooth_objective(w, b, X, y, penalty)
        while True:
            w_next = soft_threshold(w - step * grad_w, step * penalty.l1)
            b_next = b - step * grad_b
            dw, db = w_next - w, b_next - b
            bound = (
                smooth_now
                + float(grad_w @ dw)
                + grad_b * db
                + (float(dw @ dw) + db * db) / (2.0 * step)
            )
            if smooth_objective(w_next, b_next, X, y, penalty) <= bound + 1e-15 or step < 1e-12:
                break
            step *= 0.5
        w, b = w_next, b_next
        updated = objective(w, b, X, y, penalty)
        change = abs(current - updated)
        current = updated
        if change < settings.linear_tol:
            converged = True
            break
        # let the step grow back after a run of accepted steps
        step *= 1.25

    if not converged:
        logger.warning(
            "%s did not converge in %d iterations (C=%s)", h.algorithm, iteration, h.C
        )
    return LinearModel(
        weights=w,
        intercept=float(b),
        penalty=h.penalty,
        C=h.C,
        l1_ratio=h.l1_ratio,
        schema_digest=matrix.schema.digest(),
        hyperparameters=h,
        n_features=X.shape[1],
        converged=converged,
        n_iter=iteration,
    )


__all__ = [
    "Penalty",
    "fit_penalized_logistic",
    "objective",
    "smooth_gradient",
    "smooth_objective",
    "soft_threshold",
]
