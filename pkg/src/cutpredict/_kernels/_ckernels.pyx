# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Gini tree growth, tree inference, LCS length.

Mirrors ``_pykernels`` exactly; see that module for the reference semantics.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free, qsort

cdef double _GAIN_EPS = 1e-9


cdef struct ValLab:
    double v
    int64_t y


cdef int _cmp_vallab(const void* a, const void* b) noexcept nogil:
    cdef double x = (<ValLab*>a).v
    cdef double z = (<ValLab*>b).v
    return (x > z) - (x < z)


cdef inline uint64_t _splitmix_next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _midpoint(double a, double b) noexcept nogil:
    cdef double t = a / 2.0 + b / 2.0
    if t == b or t == INFINITY or t == -INFINITY:
        t = a
    return t


def build_tree(X, y, samples, int max_features, int min_leaf, int max_depth, seed):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef int64_t[::1] sv = np.array(samples, dtype=np.int64, copy=True)
    cdef Py_ssize_t n_samples = sv.shape[0]
    cdef Py_ssize_t n_features = Xv.shape[1]
    cdef Py_ssize_t cap = 2 * n_samples + 1
    cdef uint64_t state = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    n_node_a = np.zeros(cap, dtype=np.int64)
    n_pos_a = np.zeros(cap, dtype=np.int64)
    importance_a = np.zeros(n_features, dtype=np.float64)
    cdef int64_t[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef int64_t[::1] left = left_a
    cdef int64_t[::1] right = right_a
    cdef int64_t[::1] n_node = n_node_a
    cdef int64_t[::1] n_pos = n_pos_a
    cdef double[::1] importance = importance_a

    cdef ValLab* buf = <ValLab*>malloc((n_samples + 1) * sizeof(ValLab))
    cdef int64_t* feats = <int64_t*>malloc((n_features + 1) * sizeof(int64_t))
    cdef int64_t* stk = <int64_t*>malloc(4 * cap * sizeof(int64_t))
    if buf == NULL or feats == NULL or stk == NULL:
        free(buf)
        free(feats)
        free(stk)
        raise MemoryError()

    cdef Py_ssize_t n_nodes = 1
    cdef Py_ssize_t top = 0
    cdef int64_t node, start, end, depth, n, pos, neg, lp, ln, rp, rn, nl, nr
    cdef int64_t i, j, k, f, tmp, visited, best_feat, lo, hi, s
    cdef double parent_score, best_score, best_thr, score, thr
    cdef int64_t lchild, rchild

    try:
        with nogil:
            stk[0] = 0
            stk[1] = 0
            stk[2] = n_samples
            stk[3] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stk[4 * top]
                start = stk[4 * top + 1]
                end = stk[4 * top + 2]
                depth = stk[4 * top + 3]
                n = end - start
                pos = 0
                for k in range(start, end):
                    pos += yv[sv[k]]
                neg = n - pos
                n_node[node] = n
                n_pos[node] = pos
                if n < 2 * min_leaf or pos == 0 or neg == 0 or (max_depth >= 0 and depth >= max_depth):
                    continue

                parent_score = <double>(pos * pos + neg * neg) / <double>n
                best_score = -1.0
                best_feat = -1
                best_thr = 0.0
                for i in range(n_features):
                    feats[i] = i
                visited = 0
                i = 0
                while i < n_features and visited < max_features:
                    j = i + <int64_t>(_splitmix_next(&state) % <uint64_t>(n_features - i))
                    tmp = feats[i]
                    feats[i] = feats[j]
                    feats[j] = tmp
                    f = feats[i]
                    i += 1
                    for k in range(n):
                        s = sv[start + k]
                        buf[k].v = Xv[s, f]
                        buf[k].y = yv[s]
                    qsort(buf, n, sizeof(ValLab), _cmp_vallab)
                    if buf[0].v == buf[n - 1].v:
                        continue
                    visited += 1
                    lp = 0
                    ln = 0
                    for k in range(n - 1):
                        if buf[k].y:
                            lp += 1
                        else:
                            ln += 1
                        if not (buf[k].v < buf[k + 1].v):
                            continue
                        nl = k + 1
                        nr = n - nl
                        if nl < min_leaf or nr < min_leaf:
                            continue
                        rp = pos - lp
                        rn = neg - ln
                        score = (<double>(lp * lp + ln * ln) / <double>nl
                                 + <double>(rp * rp + rn * rn) / <double>nr)
                        if score > best_score:
                            best_score = score
                            best_feat = f
                            best_thr = _midpoint(buf[k].v, buf[k + 1].v)

                if best_feat < 0 or best_score <= parent_score + _GAIN_EPS:
                    continue

                importance[best_feat] += best_score - parent_score
                thr = best_thr
                lo = start
                hi = end - 1
                while lo <= hi:
                    if Xv[sv[lo], best_feat] <= thr:
                        lo += 1
                    else:
                        tmp = sv[lo]
                        sv[lo] = sv[hi]
                        sv[hi] = tmp
                        hi -= 1
                lchild = n_nodes
                rchild = n_nodes + 1
                n_nodes += 2
                feature[node] = best_feat
                threshold[node] = thr
                left[node] = lchild
                right[node] = rchild
                stk[4 * top] = rchild
                stk[4 * top + 1] = lo
                stk[4 * top + 2] = end
                stk[4 * top + 3] = depth + 1
                top += 1
                stk[4 * top] = lchild
                stk[4 * top + 1] = start
                stk[4 * top + 2] = lo
                stk[4 * top + 3] = depth + 1
                top += 1
    finally:
        free(buf)
        free(feats)
        free(stk)

    return {
        "feature": feature_a[:n_nodes].copy(),
        "threshold": threshold_a[:n_nodes].copy(),
        "left": left_a[:n_nodes].copy(),
        "right": right_a[:n_nodes].copy(),
        "n_node": n_node_a[:n_nodes].copy(),
        "n_pos": n_pos_a[:n_nodes].copy(),
        "importance": importance_a,
    }


def predict_tree(X, feature, threshold, left, right, value):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int64_t[::1] fv = np.ascontiguousarray(feature, dtype=np.int64)
    cdef double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef double[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    out_a = np.empty(Xv.shape[0], dtype=np.float64)
    cdef double[::1] out = out_a
    cdef Py_ssize_t r
    cdef int64_t node
    with nogil:
        for r in range(Xv.shape[0]):
            node = 0
            while fv[node] >= 0:
                if Xv[r, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            out[r] = vv[node]
    return out_a


def lcs_length(a, b):
    cdef int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    if av.shape[0] < bv.shape[0]:
        av, bv = bv, av
    cdef Py_ssize_t n = av.shape[0]
    cdef Py_ssize_t m = bv.shape[0]
    if m == 0:
        return 0
    cdef int64_t* prev = <int64_t*>malloc((m + 1) * sizeof(int64_t))
    cdef int64_t* cur = <int64_t*>malloc((m + 1) * sizeof(int64_t))
    cdef int64_t* swap
    cdef Py_ssize_t i, j
    cdef int64_t result
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    with nogil:
        for j in range(m + 1):
            prev[j] = 0
        for i in range(n):
            cur[0] = 0
            for j in range(m):
                if av[i] == bv[j]:
                    cur[j + 1] = prev[j] + 1
                elif cur[j] > prev[j + 1]:
                    cur[j + 1] = cur[j]
                else:
                    cur[j + 1] = prev[j + 1]
            swap = prev
            prev = cur
            cur = swap
        result = prev[m]
    free(prev)
    free(cur)
    return result
