"""Random forest deletion model, cross-validation and the random baseline."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .dataset import LabeledSample, schema_hash
from .metrics import FEATURE_NAMES

MODEL_FORMAT = "cutpredict-forest"
MODEL_VERSION = 1
METRICS = ("auc", "accuracy", "precision", "recall", "f1")


class MissingClass(ValueError):
    pass


class InsufficientClass(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_features: int | str = "sqrt"
    min_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def features_per_split(self, n_features: int) -> int:
        rule = self.max_features
        if rule == "sqrt":
            k = math.ceil(math.sqrt(n_features))
        elif rule == "log2":
            k = math.ceil(math.log2(n_features)) if n_features > 1 else 1
        elif rule in ("all", None):
            k = n_features
        elif isinstance(rule, float):
            k = math.ceil(rule * n_features)
        else:
            k = int(rule)
        return max(1, min(n_features, k))


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_node: np.ndarray
    n_pos: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.n_pos / np.maximum(self.n_node, 1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _kernels.predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def to_nested(self, names: Sequence[str]) -> dict:
        def node(i: int) -> dict:
            out = {"n": int(self.n_node[i]), "pos": int(self.n_pos[i])}
            if self.feature[i] >= 0:
                out["feature"] = names[self.feature[i]]
                out["threshold"] = float(self.threshold[i])
                out["left"] = node(int(self.left[i]))
                out["right"] = node(int(self.right[i]))
            return out

        return node(0)

    @classmethod
    def from_nested(cls, root: dict, names: Sequence[str]) -> "DecisionTree":
        index = {n: i for i, n in enumerate(names)}
        feature, threshold, left, right, n_node, n_pos = [], [], [], [], [], []

        def alloc(d: dict) -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            n_node.append(int(d["n"]))
            n_pos.append(int(d["pos"]))
            return len(feature) - 1

        # children are numbered in the same order the grower allocates them
        stack = [(alloc(root), root)]
        while stack:
            i, d = stack.pop()
            if "feature" not in d:
                continue
            feature[i] = index[d["feature"]]
            threshold[i] = float(d["threshold"])
            li = alloc(d["left"])
            ri = alloc(d["right"])
            left[i], right[i] = li, ri
            stack.append((ri, d["right"]))
            stack.append((li, d["left"]))
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(n_node, dtype=np.int64),
            np.array(n_pos, dtype=np.int64),
        )


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    hyperparams: Hyperparams
    feature_importances: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hyperparams": asdict(self.hyperparams),
            "feature_names": list(self.feature_names),
            "schema_hash": schema_hash(self.feature_names),
            "feature_importances": [float(v) for v in self.feature_importances],
            "trees": [t.to_nested(self.feature_names) for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict, expected_names: Sequence[str] = FEATURE_NAMES) -> "ForestModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a forest model document")
        names = tuple(doc["feature_names"])
        if doc.get("schema_hash") != schema_hash(names) or names != tuple(expected_names):
            raise SchemaMismatch("model feature schema does not match the current feature set")
        return cls(
            trees=[DecisionTree.from_nested(t, names) for t in doc["trees"]],
            hyperparams=Hyperparams(**doc["hyperparams"]),
            feature_importances=np.array(doc["feature_importances"], dtype=np.float64),
            feature_names=names,
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            json.dump(self.to_json(), fp)
            fp.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ForestModel":
        with open(path, encoding="utf-8") as fp:
            return cls.from_json(json.load(fp))


def samples_to_arrays(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and 0/1 targets; file-level deletions are dropped."""
    rows = [s for s in samples if s.target is not None]
    X = np.array([s.features.as_floats() for s in rows], dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    y = np.array([s.target for s in rows], dtype=np.int64)
    return X, y


def undersample_indices(y: np.ndarray, seed) -> np.ndarray:
    """Indices keeping every minority row and an equal-size random majority subset."""
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise MissingClass("undersampling needs both classes")
    if len(pos) == len(neg):
        return np.arange(len(y))
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    keep = rng.choice(majority, size=len(minority), replace=False)
    return np.sort(np.concatenate((minority, keep)))


def undersample(samples: Sequence[LabeledSample], seed) -> list[LabeledSample]:
    rows = [s for s in samples if s.target is not None]
    idx = undersample_indices(np.array([s.target for s in rows]), seed)
    return [rows[i] for i in idx]


def train_forest(X: np.ndarray, y: np.ndarray, hyperparams: Hyperparams = Hyperparams()) -> ForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if len(y) < 2 or y.min() == y.max():
        raise MissingClass("training needs at least one sample of each class")
    n, p = X.shape
    k = hyperparams.features_per_split(p)
    depth = -1 if hyperparams.max_depth is None else hyperparams.max_depth
    trees = []
    importance = np.zeros(p)
    for t in range(hyperparams.n_trees):
        # each tree has its own stream so trees can be grown in any order
        rng = np.random.default_rng([hyperparams.seed, t])
        rows = rng.integers(0, n, size=n) if hyperparams.bootstrap else np.arange(n)
        kernel_seed = int(rng.integers(0, 2**63 - 1))
        arrays = _kernels.build_tree(X, y, rows, k, hyperparams.min_leaf, depth, kernel_seed)
        raw = arrays.pop("importance")
        if raw.sum() > 0:
            importance += raw / raw.sum()
        trees.append(DecisionTree(**arrays))
    if importance.sum() > 0:
        importance = importance / importance.sum()
    return ForestModel(trees=trees, hyperparams=hyperparams, feature_importances=importance)


def predict_proba(model: ForestModel, X: np.ndarray) -> np.ndarray:
    return model.predict_proba(X)


def auc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """P(score of a positive > score of a negative), ties counting one half."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MissingClass("AUC needs both classes")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    avg_rank = upper - (counts - 1) / 2.0
    ranks = avg_rank[inverse]
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def binary_metrics(labels: Sequence[int], scores: Sequence[float], threshold: float = 0.5) -> dict[str, float]:
    labels = np.asarray(labels)
    pred = np.asarray(scores, dtype=np.float64) >= threshold
    truth = labels == 1
    tp = int((pred & truth).sum())
    tn = int((~pred & ~truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "auc": auc(labels, scores),
        "accuracy": (tp + tn) / len(labels),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "tp": tp,
        "fp": fp,
        "tn": tn,
        "fn": fn,
    }


@dataclass
class EvalReport:
    kind: str
    folds: list[dict]
    median: dict[str, float]
    importance_median: list[float] = field(default_factory=list)
    importance_std: list[float] = field(default_factory=list)
    feature_names: tuple[str, ...] = FEATURE_NAMES
    n_samples: int = 0
    excluded: int = 0

    def importance_table(self, top: int | None = None) -> list[tuple[str, float, float]]:
        rows = list(zip(self.feature_names, self.importance_median, self.importance_std))
        rows.sort(key=lambda r: (-r[1], self.feature_names.index(r[0])))
        return rows[:top] if top else rows

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "k": len(self.folds),
            "n_samples": self.n_samples,
            "excluded": self.excluded,
            "median": self.median,
            "folds": self.folds,
            "importance": [
                {"feature": n, "median": m, "std": s} for n, m, s in self.importance_table()
            ],
        }


def stratified_folds(y: np.ndarray, k: int, seed) -> np.ndarray:
    """Fold number per row; rows of each class are dealt round-robin after a shuffle."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be at least 2")
    counts = {int(c): int((y == c).sum()) for c in (0, 1)}
    if min(counts.values()) < k:
        raise InsufficientClass(f"each class needs at least {k} samples, got {counts}")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in (1, 0):
        idx = rng.permutation(np.flatnonzero(y == c))
        folds[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return folds


def _summarize(kind: str, fold_metrics: list[dict], importances: list[np.ndarray], n: int, excluded: int = 0) -> EvalReport:
    median = {m: float(np.median([f[m] for f in fold_metrics])) for m in METRICS}
    if importances:
        stack = np.vstack(importances)
        imp_med = [float(v) for v in np.median(stack, axis=0)]
        imp_std = [float(v) for v in np.std(stack, axis=0)]
    else:
        imp_med, imp_std = [], []
    return EvalReport(kind, fold_metrics, median, imp_med, imp_std, FEATURE_NAMES, n, excluded)


def evaluate_cv(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    hyperparams: Hyperparams = Hyperparams(),
    seed: int = 0,
) -> EvalReport:
    """Stratified k-fold CV; only the training split of each fold is undersampled."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_folds(y, k, [seed, 0])
    fold_metrics = []
    importances = []
    for i in range(k):
        train = np.flatnonzero(folds != i)
        test = np.flatnonzero(folds == i)
        keep = train[undersample_indices(y[train], [seed, 1, i])]
        fold_seed = int(np.random.SeedSequence([hyperparams.seed, seed, i]).generate_state(1)[0])
        params = Hyperparams(**{**asdict(hyperparams), "seed": fold_seed})
        model = train_forest(X[keep], y[keep], params)
        m = binary_metrics(y[test], model.predict_proba(X[test]))
        m.update(fold=i, n_train=int(len(keep)), n_test=int(len(test)))
        fold_metrics.append(m)
        importances.append(model.feature_importances)
    return _summarize("random_forest", fold_metrics, importances, len(y))


def score_folds(kind: str, y: np.ndarray, scores: np.ndarray, k: int, seed: int, excluded: int = 0) -> EvalReport:
    """Metrics of fixed scores over the same stratified folds the model uses."""
    y = np.asarray(y, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if k <= 1:
        m = binary_metrics(y, scores)
        m.update(fold=0, n_train=0, n_test=int(len(y)))
        return _summarize(kind, [m], [], len(y), excluded)
    folds = stratified_folds(y, k, [seed, 0])
    fold_metrics = []
    for i in range(k):
        test = np.flatnonzero(folds == i)
        m = binary_metrics(y[test], scores[test])
        m.update(fold=i, n_train=0, n_test=int(len(test)))
        fold_metrics.append(m)
    return _summarize(kind, fold_metrics, [], len(y), excluded)


def random_baseline(y: np.ndarray, seed: int = 0, k: int = 10, ratio: float | None = None) -> EvalReport:
    """Predict positive with probability equal to the positive ratio of ``y``."""
    y = np.asarray(y, dtype=np.int64)
    if ratio is None:
        ratio = float(y.mean()) if len(y) else 0.0
    rng = np.random.default_rng([seed, 2])
    preds = (rng.random(len(y)) < ratio).astype(np.float64)
    return score_folds("random", y, preds, k, seed)
