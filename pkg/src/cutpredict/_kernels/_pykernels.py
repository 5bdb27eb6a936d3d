"""Reference implementations of the hot kernels in Python and numpy.

These are used when the compiled extension is unavailable. They follow the
compiled code step for step, including the order in which random draws are
consumed, so trees grown by either backend are bit-identical.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GAIN_EPS = 1e-9


class SplitMix64:
    """Small counter-based generator shared by both kernel backends."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next() % n


def _midpoint(a: float, b: float) -> float:
    t = a / 2.0 + b / 2.0
    if t == b or t == float("inf") or t == float("-inf"):
        t = a
    return t


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    samples: np.ndarray,
    max_features: int,
    min_leaf: int,
    max_depth: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Grow one Gini tree over the rows listed in ``samples`` (repeats allowed).

    ``max_depth < 0`` means unlimited. Returns flat node arrays; ``feature``
    is -1 for leaves.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    samples = np.array(samples, dtype=np.int64, copy=True)
    n_samples = samples.shape[0]
    n_features = X.shape[1]
    rng = SplitMix64(seed)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    n_node: list[int] = []
    n_pos: list[int] = []
    importance = np.zeros(n_features, dtype=np.float64)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_node.append(0)
        n_pos.append(0)
        return len(feature) - 1

    stack = [(new_node(), 0, n_samples, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        idx = samples[start:end]
        ys = y[idx]
        n = end - start
        pos = int(ys.sum())
        neg = n - pos
        n_node[node] = n
        n_pos[node] = pos
        if (
            n < 2 * min_leaf
            or pos == 0
            or neg == 0
            or (max_depth >= 0 and depth >= max_depth)
        ):
            continue

        parent_score = (pos * pos + neg * neg) / n
        best_score = -1.0
        best_feat = -1
        best_thr = 0.0
        feats = list(range(n_features))
        visited = 0
        i = 0
        nl = np.arange(1, n, dtype=np.int64)
        nr = n - nl
        leaf_ok = (nl >= min_leaf) & (nr >= min_leaf)
        while i < n_features and visited < max_features:
            j = i + rng.below(n_features - i)
            feats[i], feats[j] = feats[j], feats[i]
            f = feats[i]
            i += 1
            vals = X[idx, f]
            order = np.argsort(vals, kind="stable")
            v = vals[order]
            if v[0] == v[-1]:
                continue
            visited += 1
            lp = np.cumsum(ys[order])[:-1]
            ln = nl - lp
            rp = pos - lp
            rn = neg - ln
            valid = leaf_ok & (v[:-1] < v[1:])
            if not valid.any():
                continue
            score = (lp * lp + ln * ln) / nl + (rp * rp + rn * rn) / nr
            score[~valid] = -np.inf
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                best_feat = f
                best_thr = _midpoint(float(v[k]), float(v[k + 1]))

        if best_feat < 0 or best_score <= parent_score + _GAIN_EPS:
            continue

        importance[best_feat] += best_score - parent_score
        goes_left = X[idx, best_feat] <= best_thr
        n_left = int(goes_left.sum())
        samples[start:end] = np.concatenate((idx[goes_left], idx[~goes_left]))
        mid = start + n_left
        lchild = new_node()
        rchild = new_node()
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lchild
        right[node] = rchild
        stack.append((rchild, mid, end, depth + 1))
        stack.append((lchild, start, mid, depth + 1))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "n_node": np.array(n_node, dtype=np.int64),
        "n_pos": np.array(n_pos, dtype=np.int64),
        "importance": importance,
    }


def predict_tree(
    X: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    value: np.ndarray,
) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    rows = np.arange(X.shape[0])
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            break
        r = rows[internal]
        nd = node[internal]
        go_left = X[r, f[internal]] <= threshold[nd]
        node[internal] = np.where(go_left, left[nd], right[nd])
    return value[node].astype(np.float64)


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two integer sequences."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, z in enumerate(b):
            if x == z:
                cur.append(prev[j] + 1)
            else:
                cur.append(cur[j] if cur[j] > prev[j + 1] else prev[j + 1])
        prev = cur
    return prev[-1]
