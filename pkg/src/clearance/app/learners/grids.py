from __future__ import annotations

from itertools import product
from typing import Any, Dict, List, Mapping, Optional, Sequence

from pydantic import ValidationError

from ..errors import ConfigError
from ..models import Hyperparameters

LINEAR_C = [0.01, 0.5, 1, 5, 10, 50]

# Parameter name -> candidate values, in declaration order
DEFAULT_GRIDS: Dict[str, Dict[str, List[Any]]] = {
    "ridge": {"C": LINEAR_C},
    "lasso": {"C": LINEAR_C},
    "elastic_net": {"C": LINEAR_C, "l1_ratio": [0.5]},
    "decision_tree": {"criterion": ["gini", "entropy"], "max_depth": [10, 20, 30]},
    "random_forest": {
        "criterion": ["gini", "entropy"],
        "max_depth": [5, 10, 20, 30, 50, 100],
        "n_estimators": [100, 200, 500, 700],
    },
    "gbm": {
        "n_estimators": [50, 100, 200],
        "learning_rate": [0.001, 0.01, 0.1, 0.3, 0.5],
    },
    "xgboost": {
        "n_estimators": [50, 100, 200],
        "learning_rate": [0.01, 0.1, 0.3, 0.5],
        "gamma": [0, 0.5, 1],
    },
}

# Per-state XGBoost grid; gamma is fixed at 0
STATE_GRID: Dict[str, List[Any]] = {
    "n_estimators": [50, 100, 200],
    "learning_rate": [0.01, 0.1, 0.2, 0.5],
    "gamma": [0],
}

ALGORITHMS: tuple[str, ...] = tuple(DEFAULT_GRIDS)


def expand_grid(
    algorithm: str,
    grid: Mapping[str, Sequence[Any]],
    seed: int = 0,
    fixed: Optional[Mapping[str, Any]] = None,
) -> List[Hyperparameters]:
    """Cartesian product in declaration order; the last parameter varies fastest."""
    if not grid:
        raise ConfigError("hyperparameter grid is empty")
    names = list(grid)
    for name in names:
        if name not in Hyperparameters.model_fields:
            raise ConfigError(f"unknown hyperparameter {name!r}")
        if len(grid[name]) == 0:
            raise ConfigError(f"no values given for {name!r}")
    base = {k: v for k, v in (fixed or {}).items() if k not in grid}
    configs = []
    for values in product(*(grid[n] for n in names)):
        try:
            configs.append(
                Hyperparameters(algorithm=algorithm, seed=seed, **base, **dict(zip(names, values)))
            )
        except ValidationError as exc:
            raise ConfigError(f"invalid {algorithm} configuration {values}: {exc}") from exc
    return configs


def default_grid(
    algorithm: str,
    seed: int = 0,
    overrides: Optional[Mapping[str, Sequence[Any]]] = None,
) -> List[Hyperparameters]:
    if algorithm not in DEFAULT_GRIDS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    grid = dict(DEFAULT_GRIDS[algorithm])
    grid.update({k: list(v) for k, v in (overrides or {}).items()})
    return expand_grid(algorithm, grid, seed)


def state_grid(seed: int = 0, overrides: Optional[Mapping[str, Sequence[Any]]] = None):
    grid = dict(STATE_GRID)
    grid.update({k: list(v) for k, v in (overrides or {}).items()})
    return expand_grid("xgboost", grid, seed)


__all__ = [
    "ALGORITHMS",
    "DEFAULT_GRIDS",
    "STATE_GRID",
    "default_grid",
    "expand_grid",
    "state_grid",
]
