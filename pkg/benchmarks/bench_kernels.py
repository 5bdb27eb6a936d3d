"""Time the compiled kernels against the numpy/Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--rows 2000]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from cutpredict._kernels import _pykernels
from cutpredict.synthetic import synthetic_arrays

try:
    from cutpredict._kernels import _ckernels
except ImportError:
    _ckernels = None


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(rows: int):
    X, y = synthetic_arrays(n=rows, seed=0)
    samples = np.random.default_rng(1).integers(0, rows, rows)
    tree = _pykernels.build_tree(X, y, samples, 5, 1, -1, 42)
    value = tree["n_pos"] / tree["n_node"]
    rng = np.random.default_rng(2)
    a = rng.integers(0, 30, 400)
    b = np.concatenate([a[:150], rng.integers(0, 30, 250)])

    yield "build_tree", lambda k: k.build_tree(X, y, samples, 5, 1, -1, 42)
    yield "predict_tree", lambda k: k.predict_tree(
        X, tree["feature"], tree["threshold"], tree["left"], tree["right"], value)
    yield "lcs_length", lambda k: k.lcs_length(a, b)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--rows", type=int, default=2000)
    args = parser.parse_args()

    print(f"{'kernel':<14}{'python (s)':>12}{'compiled (s)':>14}{'speedup':>10}")
    speedups = []
    for name, call in cases(args.rows):
        py = _best(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<14}{py:>12.5f}{'n/a':>14}{'n/a':>10}")
            continue
        c = _best(lambda: call(_ckernels), args.repeat)
        speedups.append(py / c)
        print(f"{name:<14}{py:>12.5f}{c:>14.5f}{py / c:>9.1f}x")
    if speedups:
        print(f"geometric mean speedup {statistics.geometric_mean(speedups):.1f}x")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
