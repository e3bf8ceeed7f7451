from __future__ import annotations

from typing import Callable, Dict, Optional

from ..config import Settings
from ..errors import ModelError
from ..features import FeatureMatrix
from ..models import Hyperparameters
from .base import (
    LinearModel,
    Model,
    Tree,
    TreeEnsemble,
    load_model,
    model_from_json,
    model_to_json,
    predict_margin,
    predict_proba,
    save_model,
)
from .boosting import fit_gbm, fit_xgboost
from .forest import fit_random_forest
from .grids import ALGORITHMS, default_grid, expand_grid, state_grid
from .linear import fit_penalized_logistic
from .tree import fit_decision_tree

Fitter = Callable[[FeatureMatrix, Hyperparameters, Optional[Settings]], Model]

FITTERS: Dict[str, Fitter] = {
    "decision_tree": fit_decision_tree,
    "random_forest": fit_random_forest,
    "gbm": fit_gbm,
    "xgboost": fit_xgboost,
    "ridge": fit_penalized_logistic,
    "lasso": fit_penalized_logistic,
    "elastic_net": fit_penalized_logistic,
}


def fit(matrix: FeatureMatrix, h: Hyperparameters, settings: Optional[Settings] = None) -> Model:
    fitter = FITTERS.get(h.algorithm)
    if fitter is None:
        raise ModelError(f"no learner for algorithm {h.algorithm!r}")
    return fitter(matrix, h, settings)


__all__ = [
    "ALGORITHMS",
    "FITTERS",
    "LinearModel",
    "Model",
    "Tree",
    "TreeEnsemble",
    "default_grid",
    "expand_grid",
    "fit",
    "fit_decision_tree",
    "fit_gbm",
    "fit_penalized_logistic",
    "fit_random_forest",
    "fit_xgboost",
    "load_model",
    "model_from_json",
    "model_to_json",
    "predict_margin",
    "predict_proba",
    "save_model",
    "state_grid",
]
