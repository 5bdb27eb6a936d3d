import functools
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutpredict import _kernels
from cutpredict._kernels import _pykernels

try:
    from cutpredict._kernels import _ckernels
except ImportError:  # pragma: no cover - build without a compiler
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")
FIELDS = ("feature", "threshold", "left", "right", "n_node", "n_pos", "importance")


def _data(seed, n=300, p=6, levels=5):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n, p)).astype(np.float64)
    X[:, 0] += rng.normal(0, 0.01, n)
    y = ((X[:, 1] + X[:, 2] + rng.normal(0, 1, n)) > levels - 1).astype(np.int64)
    return X, y


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")
    forced = os.environ.get("CUTPREDICT_PURE_PYTHON", "") in ("1", "true", "yes")
    assert _kernels.BACKEND == ("cython" if _ckernels is not None and not forced else "python")


@needs_compiled
@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("min_leaf, depth, k", [(1, -1, 2), (3, -1, 6), (1, 3, 1), (5, 2, 4)])
def test_tree_parity(seed, min_leaf, depth, k):
    X, y = _data(seed)
    rows = np.random.default_rng(seed + 100).integers(0, len(y), len(y))
    a = _pykernels.build_tree(X, y, rows, k, min_leaf, depth, 12345 + seed)
    b = _ckernels.build_tree(X, y, rows, k, min_leaf, depth, 12345 + seed)
    for f in FIELDS:
        np.testing.assert_array_equal(a[f], b[f], err_msg=f)
    probe = np.random.default_rng(seed).normal(2, 2, size=(50, X.shape[1]))
    tree = [a[f] for f in ("feature", "threshold", "left", "right")] + [a["n_pos"] / a["n_node"]]
    np.testing.assert_array_equal(_pykernels.predict_tree(probe, *tree), _ckernels.predict_tree(probe, *tree))


def _gini_score(y_left, y_right):
    def part(v):
        n = len(v)
        pos = int(np.sum(v))
        return (pos * pos + (n - pos) ** 2) / n

    return part(y_left) + part(y_right)


@pytest.mark.parametrize("backend", [_pykernels, _ckernels] if _ckernels else [_pykernels])
@pytest.mark.parametrize("seed", range(5))
def test_root_split_is_exhaustive_optimum(backend, seed):
    X, y = _data(seed, n=80, p=4)
    rows = np.arange(len(y))
    t = backend.build_tree(X, y, rows, X.shape[1], 1, 1, seed)
    best = -np.inf
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = lo / 2 + hi / 2
            mask = X[:, j] <= thr
            best = max(best, _gini_score(y[mask], y[~mask]))
    j, thr = int(t["feature"][0]), float(t["threshold"][0])
    mask = X[:, j] <= thr
    assert _gini_score(y[mask], y[~mask]) == pytest.approx(best, abs=1e-9)
    assert t["n_node"][0] == len(y) and t["n_pos"][0] == y.sum()


@pytest.mark.parametrize("backend", [_pykernels, _ckernels] if _ckernels else [_pykernels])
def test_unlimited_tree_fits_distinct_rows(backend):
    X, y = _data(7, n=120, p=3, levels=50)
    t = backend.build_tree(X, y, np.arange(len(y)), 3, 1, -1, 1)
    value = t["n_pos"] / t["n_node"]
    pred = backend.predict_tree(X, t["feature"], t["threshold"], t["left"], t["right"], value)
    assert np.array_equal(pred, y.astype(float))
    assert (t["feature"] == -1).sum() == (len(t["feature"]) + 1) // 2


def test_pure_node_is_leaf():
    X = np.arange(10, dtype=float).reshape(-1, 1)
    y = np.zeros(10, dtype=np.int64)
    t = _kernels.build_tree(X, y, np.arange(10), 1, 1, -1, 0)
    assert list(t["feature"]) == [-1]
    assert t["importance"].sum() == 0


@functools.lru_cache(maxsize=None)
def _lcs_rec(a, b):
    if not a or not b:
        return 0
    if a[0] == b[0]:
        return 1 + _lcs_rec(a[1:], b[1:])
    return max(_lcs_rec(a[1:], b), _lcs_rec(a, b[1:]))


_SEQ = st.lists(st.integers(0, 3), max_size=9)


@settings(max_examples=200, deadline=None)
@given(_SEQ, _SEQ)
def test_lcs_against_recursion(a, b):
    want = _lcs_rec(tuple(a), tuple(b))
    arr_a, arr_b = np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)
    assert _pykernels.lcs_length(arr_a, arr_b) == want
    if _ckernels is not None:
        assert _ckernels.lcs_length(arr_a, arr_b) == want


def test_splitmix_reference_values():
    # published SplitMix64 outputs for seed 1234567
    g = _pykernels.SplitMix64(1234567)
    assert [g.next() for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]
