import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutpredict.metrics import FEATURE_NAMES
from cutpredict.model import (
    DecisionTree,
    ForestModel,
    Hyperparams,
    InsufficientClass,
    MissingClass,
    SchemaMismatch,
    auc,
    binary_metrics,
    evaluate_cv,
    random_baseline,
    stratified_folds,
    train_forest,
    undersample,
    undersample_indices,
)
from cutpredict.synthetic import arrays_to_samples, synthetic_arrays


def brute_auc(labels, scores):
    pos = [s for l, s in zip(labels, scores) if l == 1]
    neg = [s for l, s in zip(labels, scores) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc([0, 0, 1, 1], [0.9, 0.8, 0.2, 0.1]) == 0.0
    assert auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5
    assert auc([0, 1, 1], [0.3, 0.3, 0.7]) == pytest.approx(0.75)
    with pytest.raises(MissingClass):
        auc([1, 1], [0.2, 0.3])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 5)), min_size=2, max_size=30))
def test_auc_matches_pair_count(rows):
    labels = [r[0] for r in rows]
    if len(set(labels)) < 2:
        return
    scores = [r[1] / 5 for r in rows]
    assert auc(labels, scores) == pytest.approx(brute_auc(labels, scores), abs=1e-12)


def test_auc_matches_sklearn():
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 400)
    s = np.round(rng.random(400) + 0.3 * y, 1)
    assert auc(y, s) == pytest.approx(metrics.roc_auc_score(y, s), abs=1e-12)


def test_binary_metrics_hand_example():
    # tp=2 fp=1 tn=2 fn=1
    m = binary_metrics([1, 1, 1, 0, 0, 0], [0.9, 0.6, 0.2, 0.7, 0.1, 0.4])
    assert (m["tp"], m["fp"], m["tn"], m["fn"]) == (2, 1, 2, 1)
    assert m["accuracy"] == pytest.approx(4 / 6)
    assert m["precision"] == pytest.approx(2 / 3)
    assert m["recall"] == pytest.approx(2 / 3)
    assert m["f1"] == pytest.approx(2 / 3)
    none_predicted = binary_metrics([1, 0, 0], [0.1, 0.2, 0.3])
    assert none_predicted["precision"] == 0.0 and none_predicted["f1"] == 0.0


def test_features_per_split():
    assert Hyperparams().features_per_split(23) == 5
    assert Hyperparams(max_features="log2").features_per_split(23) == 5
    assert Hyperparams(max_features="all").features_per_split(23) == 23
    assert Hyperparams(max_features=40).features_per_split(23) == 23


def test_undersample_invariants():
    y = np.array([0] * 30 + [1] * 7)
    idx = undersample_indices(y, 5)
    assert (y[idx] == 1).sum() == (y[idx] == 0).sum() == 7
    assert set(np.flatnonzero(y == 1)) <= set(idx)
    assert len(set(idx)) == len(idx)
    assert np.array_equal(idx, undersample_indices(y, 5))
    with pytest.raises(MissingClass):
        undersample_indices(np.zeros(5, dtype=int), 0)
    X, yy = synthetic_arrays(n=50, seed=2)
    kept = undersample(arrays_to_samples(X, yy), 1)
    assert sum(s.target for s in kept) * 2 == len(kept)


def test_stratified_folds():
    y = np.array([1] * 13 + [0] * 61)
    folds = stratified_folds(y, 10, 0)
    for i in range(10):
        pos = ((folds == i) & (y == 1)).sum()
        neg = ((folds == i) & (y == 0)).sum()
        assert pos in (1, 2) and neg in (6, 7)
    with pytest.raises(InsufficientClass):
        stratified_folds(np.array([1] * 3 + [0] * 20), 5, 0)


def test_training_is_deterministic():
    X, y = synthetic_arrays(n=300, seed=1)
    hp = Hyperparams(n_trees=15, seed=9)
    a, b = train_forest(X, y, hp), train_forest(X, y, hp)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    c = train_forest(X, y, Hyperparams(n_trees=15, seed=10))
    assert json.dumps(a.to_json()) != json.dumps(c.to_json())


def test_importances_and_probabilities():
    X, y = synthetic_arrays(n=400, seed=3)
    model = train_forest(X, y, Hyperparams(n_trees=20))
    imp = model.feature_importances
    assert imp.shape == (23,) and np.all(imp >= 0) and imp.sum() == pytest.approx(1.0)
    p = model.predict_proba(X)
    assert np.all((p >= 0) & (p <= 1))
    with pytest.raises(MissingClass):
        train_forest(X, np.zeros(len(y), dtype=int))


def test_serialization_round_trip(tmp_path):
    X, y = synthetic_arrays(n=200, seed=4)
    model = train_forest(X, y, Hyperparams(n_trees=8, min_leaf=2))
    path = tmp_path / "m.json"
    model.save(path)
    loaded = ForestModel.load(path)
    for a, b in zip(model.trees, loaded.trees):
        for f in ("feature", "threshold", "left", "right", "n_node", "n_pos"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    np.testing.assert_array_equal(model.predict_proba(X), loaded.predict_proba(X))
    assert loaded.hyperparams == model.hyperparams


def test_schema_mismatch_rejected():
    X, y = synthetic_arrays(n=60, seed=5)
    doc = train_forest(X, y, Hyperparams(n_trees=2)).to_json()
    tampered = dict(doc, schema_hash="0" * 16)
    with pytest.raises(SchemaMismatch):
        ForestModel.from_json(tampered)
    renamed = dict(doc, feature_names=["x"] + list(FEATURE_NAMES[1:]))
    with pytest.raises(SchemaMismatch):
        ForestModel.from_json(renamed)


def test_predict_follows_hand_traced_tree():
    names = ("a", "b")
    root = {
        "n": 10, "pos": 4, "feature": "a", "threshold": 1.5,
        "left": {"n": 6, "pos": 1},
        "right": {"n": 4, "pos": 3, "feature": "b", "threshold": -0.5,
                  "left": {"n": 1, "pos": 0}, "right": {"n": 3, "pos": 3}},
    }
    tree = DecisionTree.from_nested(root, names)
    X = np.array([[1.5, 9.0], [2.0, -0.5], [2.0, 0.0], [-3.0, -3.0]])
    # a<=1.5 -> 1/6; else b<=-0.5 -> 0/1; else 3/3
    np.testing.assert_allclose(tree.predict_proba(X), [1 / 6, 0.0, 1.0, 1 / 6])
    assert tree.to_nested(names) == root
    forest = ForestModel([tree, tree], Hyperparams(n_trees=2), np.array([0.5, 0.5]), names)
    np.testing.assert_allclose(forest.predict_proba(X), [1 / 6, 0.0, 1.0, 1 / 6])


def test_cv_undersamples_training_split_only():
    X, y = synthetic_arrays(n=400, positive_ratio=0.1, seed=6)
    report = evaluate_cv(X, y, k=5, hyperparams=Hyperparams(n_trees=10))
    assert sum(f["n_test"] for f in report.folds) == len(y)
    for f in report.folds:
        assert f["n_train"] == 2 * int(round(0.1 * 400 * 4 / 5))
    assert report.median["auc"] > 0.8
    assert len(report.importance_median) == 23


def test_separable_data_scores_perfectly():
    X, y = synthetic_arrays(n=200, seed=7, shift=0.0)
    X[:, 0] = y * 10.0
    report = evaluate_cv(X, y, k=5, hyperparams=Hyperparams(n_trees=10))
    assert report.median["auc"] == 1.0


def test_random_baseline_near_chance():
    y = np.array([0, 1] * 500)
    values = [random_baseline(y, seed=s).median["auc"] for s in range(5)]
    assert all(0.4 < v < 0.6 for v in values)
