from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from .config import Settings, get_settings
from .errors import ShapError
from .features import FeatureMatrix
from .learners.base import LEAF, Model, Tree, TreeEnsemble, design_values, predict_margin
from .models import Contribution, FeatureImportance, LocalReport

logger = logging.getLogger(__name__)

Mode = Literal["cover", "background"]

# Rows x background pairs handled per vectorized block in background mode
_PAIR_BLOCK = 250_000


@dataclass(frozen=True)
class ShapExplanation:
    """Attribution of one row's margin: base_value + sum(phi) == prediction."""

    row_id: str
    phi: np.ndarray
    base_value: float
    prediction: float
    feature_names: Tuple[str, ...]

    @property
    def additivity_gap(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.prediction)


@dataclass(frozen=True)
class ShapBatch:
    phi: np.ndarray
    base_value: float
    predictions: np.ndarray
    row_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    # Design rows that were explained; needed by signed_mean_shap
    values: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.phi.shape[0]

    def explanation(self, i: int) -> ShapExplanation:
        return ShapExplanation(
            row_id=self.row_ids[i],
            phi=self.phi[i],
            base_value=self.base_value,
            prediction=float(self.predictions[i]),
            feature_names=self.feature_names,
        )

    def explanations(self) -> List[ShapExplanation]:
        return [self.explanation(i) for i in range(len(self))]


@dataclass(frozen=True)
class BackgroundSet:
    """Reference rows standing in for absent features."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] == 0:
            raise ShapError("background set must contain at least one row")

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def sample(cls, matrix: FeatureMatrix, size: int, seed: int) -> "BackgroundSet":
        if len(matrix) == 0:
            raise ShapError("cannot draw a background set from an empty matrix")
        order = np.random.Generator(np.random.Philox(seed)).permutation(len(matrix))
        chosen = np.sort(order[: max(1, min(size, len(matrix)))])
        return cls(np.asarray(matrix.values[chosen], dtype=np.float64))


def _feature_names(model: Model, names: Optional[Sequence[str]]) -> Tuple[str, ...]:
    if names is not None:
        if len(names) != model.n_features:
            raise ShapError("feature names do not match the model width")
        return tuple(names)
    return tuple(f"f{j}" for j in range(model.n_features))


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------


def shapley_weights(p: int) -> np.ndarray:
    """|S|! (p - |S| - 1)! / p! for |S| = 0 .. p-1."""
    return np.array(
        [math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)]
    )


def _mask_bits(masks: np.ndarray, p: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(p)) & 1).astype(bool)


def _cover_values(tree: Tree, x: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Tree-conditional expectation E[f | x_S] for every mask at once."""

    def walk(node: int) -> np.ndarray:
        if tree.feature[node] == LEAF:
            return np.full(bits.shape[0], tree.value[node])
        f = int(tree.feature[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        v_left, v_right = walk(left), walk(right)
        hot = v_left if x[f] < tree.threshold[node] else v_right
        mixed = (tree.cover[left] * v_left + tree.cover[right] * v_right) / tree.cover[node]
        return np.where(bits[:, f], hot, mixed)

    return walk(0)


def _interventional_values(
    model: Model, x: np.ndarray, background: np.ndarray, masks: np.ndarray
) -> np.ndarray:
    p = x.shape[0]
    nb = background.shape[0]
    out = np.empty(masks.shape[0], dtype=np.float64)
    block = max(1, _PAIR_BLOCK // nb)
    for start in range(0, masks.shape[0], block):
        bits = _mask_bits(masks[start : start + block], p)
        hybrid = np.where(bits[:, None, :], x[None, None, :], background[None, :, :])
        margins = predict_margin(model, hybrid.reshape(-1, p)).reshape(bits.shape[0], nb)
        out[start : start + block] = margins.mean(axis=1)
    return out


def exact_shapley(
    model: Model,
    x: np.ndarray,
    background: Optional[BackgroundSet] = None,
    mode: Mode = "background",
    row_id: str = "",
    feature_names: Optional[Sequence[str]] = None,
    settings: Optional[Settings] = None,
) -> ShapExplanation:
    """Shapley values by enumerating every feature subset (cost 2^p).

    ``background`` mode replaces absent features with background rows and averages;
    ``cover`` mode uses the tree-conditional expectation weighted by node cover.
    """
    settings = settings or get_settings()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    p = x.shape[0]
    if p != model.n_features:
        raise ShapError(f"row has {p} values, model expects {model.n_features}")
    if p > settings.exact_shapley_max_features:
        raise ShapError(
            f"exact enumeration over {p} features exceeds the limit of "
            f"{settings.exact_shapley_max_features}; use tree_shap instead"
        )

    masks = np.arange(1 << p, dtype=np.int64)
    if mode == "cover":
        ensemble = _boosted_ensemble(model)
        bits = _mask_bits(masks, p)
        values = np.full(masks.shape[0], ensemble.base_score, dtype=np.float64)
        for tree in ensemble.trees:
            values += _cover_values(tree, x, bits)
    elif mode == "background":
        if background is None:
            raise ShapError("background mode needs a background set")
        values = _interventional_values(model, x, background.values, masks)
    else:
        raise ShapError(f"unknown explanation mode {mode!r}")

    sizes = np.bitwise_count(masks)
    weights = shapley_weights(p)
    phi = np.zeros(p, dtype=np.float64)
    for i in range(p):
        without = masks[(masks >> i) & 1 == 0]
        marginal = values[without | (1 << i)] - values[without]
        phi[i] = float(np.sum(weights[sizes[without]] * marginal))

    return ShapExplanation(
        row_id=row_id,
        phi=phi,
        base_value=float(values[0]),
        prediction=float(values[-1]),
        feature_names=_feature_names(model, feature_names),
    )


# ---------------------------------------------------------------------------
# TreeSHAP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeafPath:
    """Root-to-leaf path grouped by feature.

    zero[k] is the fraction of cover that follows this path through the splits on
    features[k]; conditions[k] are the (threshold, goes_left) tests on that feature.
    """

    value: float
    cover: float
    features: Tuple[int, ...]
    zero: np.ndarray
    conditions: Tuple[Tuple[Tuple[float, bool], ...], ...]

    def satisfied(self, X: np.ndarray) -> np.ndarray:
        """(rows, len(features)) bool: does the row pass every test on that feature."""
        out = np.ones((X.shape[0], len(self.features)), dtype=bool)
        for k, f in enumerate(self.features):
            column = X[:, f]
            for threshold, goes_left in self.conditions[k]:
                out[:, k] &= (column < threshold) == goes_left
        return out


def leaf_paths(tree: Tree) -> List[LeafPath]:
    paths: List[LeafPath] = []
    stack: List[Tuple[int, Dict[int, Tuple[float, List[Tuple[float, bool]]]]]] = [(0, {})]
    while stack:
        node, seen = stack.pop()
        if tree.feature[node] == LEAF:
            features = tuple(seen)
            paths.append(
                LeafPath(
                    value=float(tree.value[node]),
                    cover=float(tree.cover[node]),
                    features=features,
                    zero=np.array([seen[f][0] for f in features], dtype=np.float64),
                    conditions=tuple(tuple(seen[f][1]) for f in features),
                )
            )
            continue
        f = int(tree.feature[node])
        threshold = float(tree.threshold[node])
        for child, goes_left in ((int(tree.right[node]), False), (int(tree.left[node]), True)):
            ratio = tree.cover[child] / tree.cover[node]
            zero, tests = seen.get(f, (1.0, []))
            branch = dict(seen)
            branch[f] = (zero * ratio, tests + [(threshold, goes_left)])
            stack.append((child, branch))
    return paths


def _path_weights(one: np.ndarray, zero: np.ndarray) -> np.ndarray:
    """Shapley values of the product game v(S) = prod_{S} one * prod_{not S} zero.

    one: (u, d) per-pattern one-fractions; zero: (d,). The subset sums are read off the
    coefficients of prod_{j != k} (zero_j + one_j t).
    """
    u, d = one.shape
    weights = shapley_weights(d)
    out = np.empty((u, d), dtype=np.float64)
    for k in range(d):
        coef = np.zeros((u, d), dtype=np.float64)
        coef[:, 0] = 1.0
        for j in range(d):
            if j == k:
                continue
            grown = coef * zero[j]
            grown[:, 1:] += coef[:, :-1] * one[:, j : j + 1]
            coef = grown
        out[:, k] = (one[:, k] - zero[k]) * (coef @ weights)
    return out


def _tree_phi_cover(tree: Tree, X: np.ndarray, phi: np.ndarray) -> None:
    for path in leaf_paths(tree):
        if not path.features:
            continue
        satisfied = path.satisfied(X)
        patterns, inverse = np.unique(satisfied, axis=0, return_inverse=True)
        table = _path_weights(patterns.astype(np.float64), path.zero)
        phi[:, list(path.features)] += path.value * table[inverse.reshape(-1)]


def _tree_phi_background(tree: Tree, X: np.ndarray, B: np.ndarray, phi: np.ndarray) -> None:
    """Interventional attributions averaged over background rows.

    For a leaf reached by a hybrid of x and b, A holds the path features only x
    satisfies and D those only b satisfies; members of A gain
    v (|A|-1)! |D|! / (|A|+|D|)!, members of D lose v |A|! (|D|-1)! / (|A|+|D|)!.
    """
    nb = B.shape[0]
    depth = tree.depth() + 1
    fact = np.array([math.factorial(i) for i in range(depth + 1)], dtype=np.float64)
    block = max(1, _PAIR_BLOCK // nb)
    for path in leaf_paths(tree):
        if not path.features:
            continue
        feats = list(path.features)
        sat_b = path.satisfied(B)
        for start in range(0, X.shape[0], block):
            sat_x = path.satisfied(X[start : start + block])
            ox = sat_x[:, None, :]
            ob = sat_b[None, :, :]
            reachable = np.all(ox | ob, axis=2)
            only_x = ox & ~ob & reachable[:, :, None]
            only_b = ~ox & ob & reachable[:, :, None]
            a = only_x.sum(axis=2)
            d = only_b.sum(axis=2)
            total = a + d
            gain = np.where(a > 0, fact[np.maximum(a - 1, 0)] * fact[d] / fact[total], 0.0)
            loss = np.where(d > 0, fact[a] * fact[np.maximum(d - 1, 0)] / fact[total], 0.0)
            per_pair = only_x * gain[:, :, None] - only_b * loss[:, :, None]
            phi[start : start + block, feats] += path.value * per_pair.sum(axis=1) / nb


def _boosted_ensemble(model: Model) -> TreeEnsemble:
    if not isinstance(model, TreeEnsemble):
        raise ShapError("tree_shap needs a tree ensemble")
    if model.mode != "boosted":
        raise ShapError("tree_shap attributes margins of additive (boosted) ensembles only")
    for i, tree in enumerate(model.trees):
        if not tree.has_cover():
            raise ShapError(f"tree {i} is missing node cover")
    return model


def expected_margin(model: TreeEnsemble) -> float:
    """Cover-weighted expectation of the ensemble margin."""
    total = model.base_score
    for tree in model.trees:
        leaves = tree.feature == LEAF
        total += float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])
    return total


def base_value(
    model: Model, background: Optional[BackgroundSet] = None, mode: Mode = "cover"
) -> float:
    ensemble = _boosted_ensemble(model)
    if mode == "cover":
        return expected_margin(ensemble)
    if background is None:
        raise ShapError("background mode needs a background set")
    return float(np.mean(predict_margin(ensemble, background.values)))


def tree_shap_values(
    model: Model,
    X: np.ndarray,
    background: Optional[BackgroundSet] = None,
    mode: Mode = "cover",
) -> Tuple[np.ndarray, float]:
    """(phi matrix, base value) for the rows of X."""
    ensemble = _boosted_ensemble(model)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != ensemble.n_features:
        raise ShapError(f"rows have {X.shape[1]} values, model expects {ensemble.n_features}")
    if mode not in ("cover", "background"):
        raise ShapError(f"unknown explanation mode {mode!r}")
    base = base_value(ensemble, background, mode)
    phi = np.zeros(X.shape, dtype=np.float64)
    for tree in ensemble.trees:
        if mode == "cover":
            _tree_phi_cover(tree, X, phi)
        else:
            _tree_phi_background(tree, X, background.values, phi)
    return phi, base


def tree_shap(
    model: Model,
    x: np.ndarray,
    background: Optional[BackgroundSet] = None,
    mode: Mode = "cover",
    row_id: str = "",
    feature_names: Optional[Sequence[str]] = None,
) -> ShapExplanation:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    phi, base = tree_shap_values(model, x, background, mode)
    return ShapExplanation(
        row_id=row_id,
        phi=phi[0],
        base_value=base,
        prediction=float(predict_margin(model, x)[0]),
        feature_names=_feature_names(model, feature_names),
    )


def _explain_block(args) -> np.ndarray:
    model, X, background, mode = args
    return tree_shap_values(model, X, background, mode)[0]


def explain_rows(
    model: Model,
    matrix: FeatureMatrix,
    background: Optional[BackgroundSet] = None,
    mode: Mode = "cover",
    workers: int = 1,
    block_size: int = 4096,
    max_rows: Optional[int] = None,
) -> ShapBatch:
    """TreeSHAP over the rows of a matrix, optionally spread over worker processes.

    Blocks are reassembled in row order whatever order they finish in.
    """
    values = design_values(model, matrix)
    n = len(matrix) if max_rows is None else min(max_rows, len(matrix))
    X = np.asarray(values[:n], dtype=np.float64)
    blocks = [X[i : i + block_size] for i in range(0, n, block_size)]
    if not blocks:
        parts = [np.zeros((0, model.n_features))]
    elif workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_explain_block, [(model, b, background, mode) for b in blocks]))
    else:
        parts = [_explain_block((model, b, background, mode)) for b in blocks]
    phi = np.vstack(parts)
    base = base_value(model, background, mode)
    logger.info("explained %d rows (%s mode)", n, mode)
    return ShapBatch(
        phi=phi,
        base_value=base,
        predictions=predict_margin(model, X) if n else np.zeros(0),
        row_ids=tuple(matrix.row_ids[:n]),
        feature_names=tuple(matrix.schema.names),
        values=X,
    )


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def _stack(
    explanations: Union[ShapBatch, Sequence[ShapExplanation]],
) -> Tuple[np.ndarray, Tuple[str, ...]]:
    if isinstance(explanations, ShapBatch):
        if len(explanations) == 0:
            raise ShapError("no explanations to aggregate")
        return explanations.phi, explanations.feature_names
    if not explanations:
        raise ShapError("no explanations to aggregate")
    names = explanations[0].feature_names
    for e in explanations[1:]:
        if e.feature_names != names:
            raise ShapError("explanations come from different feature schemas")
    return np.vstack([e.phi for e in explanations]), names


def mean_abs_shap(
    explanations: Union[ShapBatch, Sequence[ShapExplanation]],
) -> List[FeatureImportance]:
    """Global ranking by mean |phi|, ties broken alphabetically."""
    phi, names = _stack(explanations)
    means = np.abs(phi).mean(axis=0)
    order = sorted(range(len(names)), key=lambda j: (-means[j], names[j]))
    return [
        FeatureImportance(feature=names[j], mean_abs_phi=float(means[j]), rank=rank)
        for rank, j in enumerate(order, start=1)
    ]


def local_report(explanation: ShapExplanation, top_k: int = 10) -> LocalReport:
    if top_k < 1:
        raise ShapError(f"top_k must be at least 1, got {top_k}")
    names = explanation.feature_names
    phi = explanation.phi
    order = sorted(range(len(names)), key=lambda j: (-abs(phi[j]), names[j]))
    shown = order[:top_k]
    contributions = [Contribution(feature=names[j], phi=float(phi[j])) for j in shown]
    total = float(phi.sum())
    margin = explanation.base_value + total
    return LocalReport(
        row_id=explanation.row_id,
        base_value=explanation.base_value,
        contributions=contributions,
        remainder=total - sum(c.phi for c in contributions),
        margin=margin,
        probability=float(expit(margin)),
    )


def explanation_frame(batch: ShapBatch) -> pd.DataFrame:
    """One row per (row, feature) with the row's base value, margin and probability."""
    n, p = batch.phi.shape
    margin = np.asarray(batch.predictions, dtype=np.float64)
    return pd.DataFrame(
        {
            "row_id": np.repeat(np.asarray(batch.row_ids, dtype=object), p),
            "feature": np.tile(np.asarray(batch.feature_names, dtype=object), n),
            "phi": batch.phi.reshape(-1),
            "base_value": np.full(n * p, batch.base_value),
            "margin": np.repeat(margin, p),
            "probability": np.repeat(expit(margin), p),
        }
    )


def state_shap_table(batches: Mapping[str, ShapBatch]) -> pd.DataFrame:
    """Long table of per-state mean |phi| for every feature of each state's schema."""
    rows = []
    for state in sorted(batches):
        for item in mean_abs_shap(batches[state]):
            rows.append(
                {
                    "state": state,
                    "feature": item.feature,
                    "mean_abs_phi": item.mean_abs_phi,
                    "rank": item.rank,
                }
            )
    return pd.DataFrame(rows, columns=["state", "feature", "mean_abs_phi", "rank"])


def feature_spread(table: pd.DataFrame, top: int = 10) -> pd.DataFrame:
    """Across-state min / median / max of mean |phi| for the features with the largest median."""
    if table.empty:
        return pd.DataFrame(columns=["feature", "min", "median", "max", "states"])
    spread = (
        table.groupby("feature")["mean_abs_phi"]
        .agg(["min", "median", "max", "count"])
        .rename(columns={"count": "states"})
        .reset_index()
    )
    spread = spread.sort_values(["median", "feature"], ascending=[False, True], kind="mergesort")
    return spread.head(top).reset_index(drop=True)


def signed_mean_shap(batch: ShapBatch, feature: str, active_only: bool = True) -> Optional[float]:
    """Mean signed phi of one feature, by default only over rows where it is set."""
    try:
        j = batch.feature_names.index(feature)
    except ValueError as exc:
        raise ShapError(f"unknown feature {feature!r}") from exc
    column = batch.phi[:, j]
    if active_only:
        if batch.values is None:
            raise ShapError("batch carries no design values to select active rows")
        column = column[batch.values[:, j] > 0]
    if column.size == 0:
        return None
    return float(column.mean())


__all__ = [
    "BackgroundSet",
    "LeafPath",
    "ShapBatch",
    "ShapExplanation",
    "exact_shapley",
    "expected_margin",
    "explain_rows",
    "explanation_frame",
    "feature_spread",
    "leaf_paths",
    "local_report",
    "mean_abs_shap",
    "shapley_weights",
    "signed_mean_shap",
    "state_shap_table",
    "tree_shap",
    "tree_shap_values",
]
