from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError
from scipy.special import expit, logit

from ..errors import ModelError, NotFittedError, SchemaMismatchError
from ..features import FeatureMatrix
from ..models import Hyperparameters

logger = logging.getLogger(__name__)

LEAF = -1
# Probabilities are clipped before logit so averaged-mode margins stay finite.
PROBA_CLIP = 1e-15


@dataclass(frozen=True)
class Tree:
    """Array-backed binary tree. Node 0 is the root; rows go left when x[feature] < threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @classmethod
    def from_lists(
        cls,
        feature: Sequence[int],
        threshold: Sequence[float],
        left: Sequence[int],
        right: Sequence[int],
        value: Sequence[float],
        cover: Sequence[float],
    ) -> "Tree":
        return cls(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value, dtype=np.float64),
            cover=np.asarray(cover, dtype=np.float64),
        )

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            rows = np.nonzero(feat != LEAF)[0]
            if rows.size == 0:
                return node
            current = node[rows]
            go_left = X[rows, feat[rows]] < self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        deepest = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            deepest = max(deepest, d)
            if not self.is_leaf(node):
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return deepest

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    def has_cover(self) -> bool:
        return bool(np.all(np.isfinite(self.cover)) and np.all(self.cover > 0))


class NodeDocument(BaseModel):
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional[int] = None
    right: Optional[int] = None
    leaf_value: Optional[float] = None
    cover: Optional[float] = None


class TreeDocument(BaseModel):
    nodes: List[NodeDocument]


class ModelDocument(BaseModel):
    """JSON form of a fitted model. For linear models base_score is the intercept."""

    algorithm: str
    base_score: float
    learning_rate: float = 1.0
    mode: Literal["boosted", "averaged"] = "boosted"
    trees: List[TreeDocument] = []
    weights: Optional[List[float]] = None
    n_features: int
    schema_digest: str
    hyperparameters: Hyperparameters
    converged: Optional[bool] = None
    n_iter: Optional[int] = None


@dataclass(frozen=True)
class TreeEnsemble:
    """Tree model. Boosted margins are base_score plus the sum of leaf values, with the
    learning rate already applied to the leaves; averaged mode averages per-tree
    probabilities. A single decision tree is a boosted ensemble of one tree with base 0."""

    algorithm: str
    trees: tuple[Tree, ...]
    base_score: float
    learning_rate: float
    mode: Literal["boosted", "averaged"]
    schema_digest: str
    hyperparameters: Hyperparameters
    n_features: int

    @property
    def n_leaves(self) -> int:
        return sum(t.n_leaves for t in self.trees)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    penalty: str
    C: float
    l1_ratio: float
    schema_digest: str
    hyperparameters: Hyperparameters
    n_features: int
    converged: bool = True
    n_iter: int = 0


Model = Union[TreeEnsemble, LinearModel]


def design_values(model: Model, x: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """Raw design values, after checking they belong to the model's schema."""
    if isinstance(model, TreeEnsemble) and not model.trees:
        raise NotFittedError("tree model has no trees")
    if isinstance(x, FeatureMatrix):
        if x.schema.digest() != model.schema_digest:
            raise SchemaMismatchError("feature schema does not match the one the model was fit on")
        values = x.values
    else:
        values = np.asarray(x)
        if values.ndim == 1:
            values = values[None, :]
    if values.ndim != 2 or values.shape[1] != model.n_features:
        raise SchemaMismatchError(
            f"expected {model.n_features} feature columns, got {values.shape[-1]}"
        )
    return values


def predict_margin(model: Model, x: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """Log-odds per row."""
    values = design_values(model, x)
    if isinstance(model, LinearModel):
        return values.astype(np.float64) @ model.weights + model.intercept
    if model.mode == "averaged":
        proba = np.clip(_mean_tree_proba(model, values), PROBA_CLIP, 1.0 - PROBA_CLIP)
        return logit(proba)
    margin = np.full(values.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        margin += tree.predict(values)
    return margin


def predict_proba(model: Model, x: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(model, TreeEnsemble) and model.mode == "averaged":
        return _mean_tree_proba(model, design_values(model, x))
    return expit(predict_margin(model, x))


def _mean_tree_proba(model: TreeEnsemble, values: np.ndarray) -> np.ndarray:
    total = np.zeros(values.shape[0], dtype=np.float64)
    for tree in model.trees:
        total += expit(tree.predict(values))
    return total / len(model.trees)


def to_document(model: Model) -> ModelDocument:
    if isinstance(model, LinearModel):
        return ModelDocument(
            algorithm=model.hyperparameters.algorithm,
            base_score=float(model.intercept),
            weights=[float(w) for w in model.weights],
            n_features=model.n_features,
            schema_digest=model.schema_digest,
            hyperparameters=model.hyperparameters,
            converged=model.converged,
            n_iter=model.n_iter,
        )
    trees = []
    for tree in model.trees:
        nodes = []
        for i in range(tree.n_nodes):
            cover = float(tree.cover[i]) if np.isfinite(tree.cover[i]) else None
            if tree.is_leaf(i):
                nodes.append(NodeDocument(leaf_value=float(tree.value[i]), cover=cover))
            else:
                nodes.append(
                    NodeDocument(
                        feature=int(tree.feature[i]),
                        threshold=float(tree.threshold[i]),
                        left=int(tree.left[i]),
                        right=int(tree.right[i]),
                        cover=cover,
                    )
                )
        trees.append(TreeDocument(nodes=nodes))
    return ModelDocument(
        algorithm=model.algorithm,
        base_score=float(model.base_score),
        learning_rate=float(model.learning_rate),
        mode=model.mode,
        trees=trees,
        n_features=model.n_features,
        schema_digest=model.schema_digest,
        hyperparameters=model.hyperparameters,
    )


def from_document(doc: ModelDocument) -> Model:
    if doc.weights is not None:
        h = doc.hyperparameters
        return LinearModel(
            weights=np.asarray(doc.weights, dtype=np.float64),
            intercept=doc.base_score,
            penalty=h.penalty or "l2",
            C=h.C,
            l1_ratio=h.l1_ratio,
            schema_digest=doc.schema_digest,
            hyperparameters=h,
            n_features=doc.n_features,
            converged=bool(doc.converged) if doc.converged is not None else True,
            n_iter=doc.n_iter or 0,
        )
    trees = []
    for tree_doc in doc.trees:
        feature, threshold, left, right, value, cover = [], [], [], [], [], []
        for node in tree_doc.nodes:
            is_leaf = node.feature is None
            if is_leaf and node.leaf_value is None:
                raise ModelError("leaf node without leaf_value")
            if not is_leaf and (node.left is None or node.right is None or node.threshold is None):
                raise ModelError("internal node without children or threshold")
            feature.append(LEAF if is_leaf else node.feature)
            threshold.append(0.0 if is_leaf else node.threshold)
            left.append(LEAF if is_leaf else node.left)
            right.append(LEAF if is_leaf else node.right)
            value.append(node.leaf_value if is_leaf else 0.0)
            cover.append(np.nan if node.cover is None else node.cover)
        trees.append(Tree.from_lists(feature, threshold, left, right, value, cover))
    if not trees:
        raise ModelError("tree model document has no trees")
    return TreeEnsemble(
        algorithm=doc.algorithm,
        trees=tuple(trees),
        base_score=doc.base_score,
        learning_rate=doc.learning_rate,
        mode=doc.mode,
        schema_digest=doc.schema_digest,
        hyperparameters=doc.hyperparameters,
        n_features=doc.n_features,
    )


def model_to_json(model: Model) -> str:
    return to_document(model).model_dump_json(indent=2)


def model_from_json(text: str) -> Model:
    try:
        doc = ModelDocument.model_validate_json(text)
    except ValidationError as exc:
        raise ModelError(f"invalid model document: {exc.error_count()} error(s)") from exc
    return from_document(doc)


def save_model(model: Model, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(model_to_json(model), encoding="utf-8")
    logger.info("saved %s model to %s", to_document(model).algorithm, target)
    return target


def load_model(path: str | Path) -> Model:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    return model_from_json(text)


__all__ = [
    "LEAF",
    "LinearModel",
    "Model",
    "ModelDocument",
    "Tree",
    "TreeEnsemble",
    "design_values",
    "from_document",
    "load_model",
    "model_from_json",
    "model_to_json",
    "predict_margin",
    "predict_proba",
    "save_model",
    "to_document",
]
