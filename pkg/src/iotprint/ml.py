"""One-vs-all classifiers: boosted stumps, kNN, decision tree, voting.

The primary model is gradient boosting with depth-1 regression trees
under binomial deviance: starting from the prior log-odds, each stage
fits a stump to the negative gradient (residuals y - p) by least
squares, then sets its two leaf values with a single Newton step
(sum residual / sum p(1-p) per leaf). Predictions sum the learning-rate
scaled leaf values onto the initial score; the label is sign(score)
with ties going to +1.

All training is deterministic: stump and tree split ties resolve to the
lowest feature index then the lowest threshold, kNN distance ties at
the k-th neighbor include the smallest row index, and tied kNN votes
predict -1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyData, KTooLarge, SingleClassData

MAX_STAGES = 100
MODEL_SCHEMA = "model/1"


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with +/-1 labels for one one-vs-all problem."""

    rows: np.ndarray
    labels: np.ndarray
    positive_class: str

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if labels.shape != (rows.shape[0],):
            raise ValueError("rows and labels must have equal length")
        if labels.size and not np.all(np.isin(labels, (-1, 1))):
            raise ValueError("labels must be +1 or -1")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class Stump:
    """Depth-1 regression tree: x[feature] <= threshold goes left."""

    feature_index: int
    threshold: float
    left_value: float
    right_value: float


@dataclass(frozen=True)
class BoostedModel:
    initial_score: float
    stages: tuple
    learning_rate: float
    n_features: int
    positive_class: str
    training_deviance: tuple = field(default=(), compare=False)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class KnnModel:
    rows: np.ndarray
    labels: np.ndarray
    k: int
    positive_class: str

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class TreeNode:
    """Internal node when label is None, else a leaf."""

    label: int | None = None
    feature_index: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    max_depth: int
    n_features: int
    positive_class: str


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def _mean_deviance(labels: np.ndarray, scores: np.ndarray) -> float:
    # logistic loss log(1 + exp(-y * F)), stable for large |F|
    return float(np.logaddexp(0.0, -labels * scores).mean())


def _newton_value(resid: np.ndarray, weight: np.ndarray) -> float:
    den = float(weight.sum())
    if den <= 1e-150:
        return 0.0
    return float(resid.sum() / den)


def _safeguarded_leaf(value: float, labels: np.ndarray, scores: np.ndarray, rate: float) -> float:
    """Backtrack a Newton leaf value until it does not raise the leaf loss.

    A raw Newton step can overshoot badly once points saturate (tiny
    p(1-p) sums under a finite residual sum), which would break the
    non-increasing-deviance guarantee. The Newton direction is always a
    descent direction for the leaf, so halving terminates; a step that
    never helps collapses to 0 (loss unchanged).
    """
    if value == 0.0 or labels.size == 0:
        return value
    before = float(np.logaddexp(0.0, -labels * scores).sum())
    for _ in range(64):
        after = float(np.logaddexp(0.0, -labels * (scores + rate * value)).sum())
        if after <= before:
            return value
        value *= 0.5
    return 0.0


class _SplitSearch:
    """Sorted-order machinery shared by every boosting stage.

    Feature columns are argsorted once; per stage only the target values
    change. Candidate thresholds are midpoints between consecutive
    distinct sorted values.
    """

    def __init__(self, X: np.ndarray):
        self.X = X
        n, _ = X.shape
        self.order = np.argsort(X, axis=0, kind="stable")
        xs = np.take_along_axis(X, self.order, axis=0)
        self.midpoints = 0.5 * (xs[1:] + xs[:-1]) if n > 1 else np.empty((0, X.shape[1]))
        self.valid = xs[1:] > xs[:-1] if n > 1 else np.empty((0, X.shape[1]), dtype=bool)
        self.any_valid = bool(self.valid.any())
        self.left_n = np.arange(1, n, dtype=np.float64)[:, None]
        self.right_n = n - self.left_n
        self.fallback_threshold = float(xs[-1, 0]) if n else 0.0

    def best_split(self, target: np.ndarray) -> tuple:
        """(feature, threshold) minimizing squared error of leaf means.

        Gain maximized is sum_L^2/n_L + sum_R^2/n_R, which orders splits
        identically to squared error. Ties pick the lowest feature index,
        then the lowest threshold (argmax over a feature-major layout).
        """
        sorted_target = target[self.order]
        csum = np.cumsum(sorted_target, axis=0)
        left_sum = csum[:-1]
        total = csum[-1]
        gain = left_sum**2 / self.left_n + (total - left_sum) ** 2 / self.right_n
        gain[~self.valid] = -np.inf
        flat = int(np.argmax(gain.T))
        n_candidates = gain.shape[0]
        feature, boundary = divmod(flat, n_candidates)
        return feature, float(self.midpoints[boundary, feature])


def train_boosted(
    data: LabeledDataset, n_stages: int = 100, learning_rate: float = 1.0
) -> BoostedModel:
    """Fit the boosted-stump ensemble; records the deviance trajectory.

    The recorded training deviance (mean logistic loss, entry 0 before
    any stage) is non-increasing stage over stage.
    """
    if len(data) == 0:
        raise EmptyData("cannot train on an empty dataset")
    if np.all(data.labels == data.labels[0]):
        raise SingleClassData("training data contains a single class")
    if not 1 <= n_stages <= MAX_STAGES:
        raise ValueError(f"n_stages must be in 1..{MAX_STAGES}")
    X, y = data.rows, data.labels
    y01 = (y > 0).astype(np.float64)
    p0 = float(y01.mean())
    initial = float(np.log(p0 / (1.0 - p0)))
    scores = np.full(len(y), initial)

    search = _SplitSearch(X)
    deviance = [_mean_deviance(y, scores)]
    stages = []
    for _ in range(n_stages):
        prob = _sigmoid(scores)
        resid = y01 - prob
        weight = prob * (1.0 - prob)
        if search.any_valid:
            feature, threshold = search.best_split(resid)
            left = X[:, feature] <= threshold
            left_value = _safeguarded_leaf(
                _newton_value(resid[left], weight[left]), y[left], scores[left], learning_rate
            )
            right_value = _safeguarded_leaf(
                _newton_value(resid[~left], weight[~left]), y[~left], scores[~left], learning_rate
            )
        else:
            # Every feature is constant; emit a both-sides-equal stump.
            feature, threshold = 0, search.fallback_threshold
            left = np.ones(len(y), dtype=bool)
            left_value = right_value = _safeguarded_leaf(
                _newton_value(resid, weight), y, scores, learning_rate
            )
        stages.append(Stump(int(feature), threshold, left_value, right_value))
        scores = scores + learning_rate * np.where(left, left_value, right_value)
        deviance.append(_mean_deviance(y, scores))
    return BoostedModel(
        initial_score=initial,
        stages=tuple(stages),
        learning_rate=learning_rate,
        n_features=data.n_features,
        positive_class=data.positive_class,
        training_deviance=tuple(deviance),
    )


def boosted_scores(model: BoostedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    scores = np.full(X.shape[0], model.initial_score)
    for stump in model.stages:
        leaf = np.where(
            X[:, stump.feature_index] <= stump.threshold, stump.left_value, stump.right_value
        )
        scores += model.learning_rate * leaf
    return scores


def predict_boosted(model: BoostedModel, x: Sequence[float]) -> tuple:
    """Return (label, score) with score >= 0 mapped to +1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape}")
    score = float(boosted_scores(model, x[None, :])[0])
    return (1 if score >= 0 else -1), score


def train_knn(data: LabeledDataset, k: int) -> KnnModel:
    if len(data) == 0:
        raise EmptyData("cannot train on an empty dataset")
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(data):
        raise KTooLarge(f"k={k} exceeds {len(data)} training rows")
    return KnnModel(data.rows, data.labels, k, data.positive_class)


def predict_knn(model: KnnModel, x: Sequence[float]) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape}")
    dist2 = ((model.rows - x) ** 2).sum(axis=1)
    nearest = np.argsort(dist2, kind="stable")[: model.k]
    vote = int(model.labels[nearest].sum())
    return 1 if vote > 0 else -1


def knn_labels(model: KnnModel, X: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Batch kNN prediction via the expanded-norm distance identity."""
    X = np.asarray(X, dtype=np.float64)
    rows = model.rows
    row_sq = (rows**2).sum(axis=1)
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], chunk):
        block = X[start : start + chunk]
        dist2 = (block**2).sum(axis=1)[:, None] + row_sq[None, :] - 2.0 * block @ rows.T
        nearest = np.argsort(dist2, axis=1, kind="stable")[:, : model.k]
        votes = model.labels[nearest].sum(axis=1)
        out[start : start + chunk] = np.where(votes > 0, 1, -1)
    return out


def _gini_split(X: np.ndarray, y: np.ndarray) -> tuple | None:
    """Best (feature, threshold) by weighted Gini impurity, or None.

    Minimizing weighted impurity is equivalent to maximizing
    sum_side (pos^2 + neg^2) / n_side; ties resolve feature-major.
    """
    n = X.shape[0]
    if n < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    pos_sorted = (y[order] > 0).astype(np.float64)
    pos_left = np.cumsum(pos_sorted, axis=0)[:-1]
    total_pos = float((y > 0).sum())
    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    neg_left = left_n - pos_left
    pos_right = total_pos - pos_left
    neg_right = right_n - pos_right
    score = (pos_left**2 + neg_left**2) / left_n + (pos_right**2 + neg_right**2) / right_n
    score[~valid] = -np.inf
    flat = int(np.argmax(score.T))
    feature, boundary = divmod(flat, score.shape[0])
    midpoint = 0.5 * (xs[boundary, feature] + xs[boundary + 1, feature])
    return feature, float(midpoint)


def _majority(y: np.ndarray) -> int:
    vote = int(y.sum())
    return 1 if vote > 0 else -1


def _grow_tree(X: np.ndarray, y: np.ndarray, depth_left: int) -> TreeNode:
    if np.all(y == y[0]):
        return TreeNode(label=int(y[0]))
    if depth_left == 0:
        return TreeNode(label=_majority(y))
    split = _gini_split(X, y)
    if split is None:
        return TreeNode(label=_majority(y))
    feature, threshold = split
    mask = X[:, feature] <= threshold
    return TreeNode(
        feature_index=feature,
        threshold=threshold,
        left=_grow_tree(X[mask], y[mask], depth_left - 1),
        right=_grow_tree(X[~mask], y[~mask], depth_left - 1),
    )


def train_tree(data: LabeledDataset, max_depth: int = 5) -> TreeModel:
    """Greedy Gini-impurity tree; pure data yields a single leaf."""
    if len(data) == 0:
        raise EmptyData("cannot train on an empty dataset")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    root = _grow_tree(data.rows, data.labels, max_depth)
    return TreeModel(root, max_depth, data.n_features, data.positive_class)


def predict_tree(model: TreeModel, x: Sequence[float]) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape}")
    node = model.root
    while node.label is None:
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return int(node.label)


def tree_labels(model: TreeModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)

    def assign(node: TreeNode, idx: np.ndarray) -> None:
        if node.label is not None:
            out[idx] = node.label
            return
        mask = X[idx, node.feature_index] <= node.threshold
        assign(node.left, idx[mask])
        assign(node.right, idx[~mask])

    assign(model.root, np.arange(X.shape[0]))
    return out


def predict_vote(
    boosted: BoostedModel, knn: KnnModel, tree: TreeModel, x: Sequence[float]
) -> int:
    """Majority label of the three classifiers (odd voters, never tied)."""
    total = predict_boosted(boosted, x)[0] + predict_knn(knn, x) + predict_tree(tree, x)
    return 1 if total > 0 else -1


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_model_doc(model), indent=1) + "\n", encoding="ascii")


def _model_doc(model) -> dict:
    if isinstance(model, BoostedModel):
        return {
            "schema": MODEL_SCHEMA,
            "kind": "boosted",
            "positive_class": model.positive_class,
            "n_features": model.n_features,
            "learning_rate": model.learning_rate,
            "initial_score": model.initial_score,
            "stages": [
                [s.feature_index, s.threshold, s.left_value, s.right_value]
                for s in model.stages
            ],
        }
    if isinstance(model, KnnModel):
        return {
            "schema": MODEL_SCHEMA,
            "kind": "knn",
            "positive_class": model.positive_class,
            "k": model.k,
            "rows": model.rows.tolist(),
            "labels": model.labels.tolist(),
        }
    if isinstance(model, TreeModel):
        return {
            "schema": MODEL_SCHEMA,
            "kind": "tree",
            "positive_class": model.positive_class,
            "n_features": model.n_features,
            "max_depth": model.max_depth,
            "root": _node_doc(model.root),
        }
    if isinstance(model, VoteModel):
        return {
            "schema": MODEL_SCHEMA,
            "kind": "vote",
            "positive_class": model.positive_class,
            "members": [_model_doc(model.boosted), _model_doc(model.knn), _model_doc(model.tree)],
        }
    raise TypeError(f"cannot persist {type(model).__name__}")


def _node_doc(node: TreeNode) -> dict:
    if node.label is not None:
        return {"label": node.label}
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "left": _node_doc(node.left),
        "right": _node_doc(node.right),
    }


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    return _model_from_doc(doc)


def _model_from_doc(doc: dict):
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema: {doc.get('schema')!r}")
    kind = doc["kind"]
    if kind == "boosted":
        return BoostedModel(
            initial_score=float(doc["initial_score"]),
            stages=tuple(
                Stump(int(f), float(t), float(l), float(r)) for f, t, l, r in doc["stages"]
            ),
            learning_rate=float(doc["learning_rate"]),
            n_features=int(doc["n_features"]),
            positive_class=doc["positive_class"],
        )
    if kind == "knn":
        return KnnModel(
            rows=np.asarray(doc["rows"], dtype=np.float64),
            labels=np.asarray(doc["labels"], dtype=np.int64),
            k=int(doc["k"]),
            positive_class=doc["positive_class"],
        )
    if kind == "tree":
        return TreeModel(
            root=_node_from_doc(doc["root"]),
            max_depth=int(doc["max_depth"]),
            n_features=int(doc["n_features"]),
            positive_class=doc["positive_class"],
        )
    if kind == "vote":
        members = [_model_from_doc(m) for m in doc["members"]]
        return VoteModel(*members)
    raise ValueError(f"unknown model kind {kind!r}")


def _node_from_doc(doc: dict) -> TreeNode:
    if "label" in doc:
        return TreeNode(label=int(doc["label"]))
    return TreeNode(
        feature_index=int(doc["feature_index"]),
        threshold=float(doc["threshold"]),
        left=_node_from_doc(doc["left"]),
        right=_node_from_doc(doc["right"]),
    )


@dataclass(frozen=True)
class VoteModel:
    """Bundle of the three classifiers used for majority voting."""

    boosted: BoostedModel
    knn: KnnModel
    tree: TreeModel

    @property
    def positive_class(self) -> str:
        return self.boosted.positive_class

    @property
    def n_features(self) -> int:
        return self.boosted.n_features
