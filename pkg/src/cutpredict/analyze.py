"""Compare feature distributions of deleted and survived methods."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .dataset import LabeledSample, SurvivalLabel
from .metrics import FEATURE_NAMES

# conventional |delta| cut points
_MAGNITUDE_LEVELS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


class InsufficientClass(ValueError):
    pass


class MannWhitneyResult(NamedTuple):
    u: float
    p_value: float
    degenerate: bool = False

    def u_min(self, n_x: int, n_y: int) -> float:
        return min(self.u, n_x * n_y - self.u)


def _average_ranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MannWhitneyResult:
    """U of ``x`` over ``y`` (ties count 1/2) with a two-sided normal-approximation p.

    The variance is tie-corrected and a 0.5 continuity correction is applied.
    When every pooled value is identical the result is flagged degenerate and
    p is 1.0.
    """
    m, n = len(x), len(y)
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    ranks, ties = _average_ranks(list(x) + list(y))
    u = sum(ranks[:m]) - m * (m + 1) / 2.0
    total = m + n
    tie_term = sum(t * t * t - t for t in ties)
    if len(ties) == 1:
        return MannWhitneyResult(u, 1.0, True)
    var = m * n / 12.0 * ((total + 1) - tie_term / (total * (total - 1)))
    if var <= 0:
        return MannWhitneyResult(u, 1.0, True)
    dev = abs(u - m * n / 2.0) - 0.5
    z = max(dev, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return MannWhitneyResult(u, min(max(p, 0.0), 1.0))


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """(#(x > y) - #(x < y)) / (|x| |y|) over all cross pairs."""
    if not x or not y:
        raise ValueError("both samples must be non-empty")
    ys = sorted(y)
    more = less = 0
    for v in x:
        less_than_v = bisect.bisect_left(ys, v)
        more += less_than_v
        less += len(ys) - bisect.bisect_right(ys, v)
    return (more - less) / (len(x) * len(ys))


def magnitude(delta: float) -> str:
    d = abs(delta)
    for bound, name in _MAGNITUDE_LEVELS:
        if d < bound:
            return name
    return "large"


@dataclass(frozen=True)
class FeatureComparison:
    feature_name: str
    n_survived: int
    n_deleted: int
    u_statistic: float
    p_value: float
    cliffs_delta: float
    magnitude: str
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "feature": self.feature_name,
            "n_survived": self.n_survived,
            "n_deleted": self.n_deleted,
            "u": self.u_statistic,
            "p_value": self.p_value,
            "cliffs_delta": self.cliffs_delta,
            "magnitude": self.magnitude,
            "degenerate": self.degenerate,
        }


def compare_all(samples: Sequence[LabeledSample]) -> list[FeatureComparison]:
    """One comparison per feature, deleted (x) vs survived (y), largest |delta| first.

    File-level deletions are excluded; booleans compare as 0/1.
    """
    deleted = [s.features.as_floats() for s in samples if s.label is SurvivalLabel.DELETED_METHOD]
    survived = [s.features.as_floats() for s in samples if s.label is SurvivalLabel.SURVIVED]
    if not deleted or not survived:
        raise InsufficientClass(
            f"need both classes, got {len(deleted)} deleted and {len(survived)} survived"
        )
    out = []
    for j, name in enumerate(FEATURE_NAMES):
        x = [row[j] for row in deleted]
        y = [row[j] for row in survived]
        mw = mann_whitney_u(x, y)
        delta = cliffs_delta(x, y)
        out.append(
            FeatureComparison(name, len(y), len(x), mw.u, mw.p_value, delta, magnitude(delta), mw.degenerate)
        )
    out.sort(key=lambda c: -abs(c.cliffs_delta))
    return out
