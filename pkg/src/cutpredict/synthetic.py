"""Synthetic feature datasets for sanity checks and benchmarks."""

from __future__ import annotations

import numpy as np

from .dataset import LabeledSample, SurvivalLabel
from .extract import MethodIdentity
from .metrics import FEATURE_NAMES, FeatureVector


def synthetic_arrays(
    n: int = 2000,
    positive_ratio: float = 0.2,
    seed: int = 0,
    shift: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix where deleted methods have longer names, more characters and more lines.

    ``shift`` scales the class difference on those three features; every
    other feature is drawn from the same distribution for both classes.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * positive_ratio))
    y = np.zeros(n, dtype=np.int64)
    y[rng.choice(n, size=n_pos, replace=False)] = 1
    cols = {name: np.zeros(n) for name in FEATURE_NAMES}

    code_loc = rng.poisson(8 + 6 * shift * y) + 2
    cols["code_loc"] = code_loc
    cols["char_length"] = np.round(code_loc * rng.normal(32, 6, n) + 120 * shift * y).clip(10)
    cols["method_name_words"] = rng.poisson(2 + 2 * shift * y) + 1
    cols["tokens"] = np.round(rng.normal(60, 25, n)).clip(6)
    cols["docstring_words"] = rng.poisson(4, n) * rng.integers(0, 2, n)
    for flag, p in (
        ("is_getter", 0.15), ("is_setter", 0.05), ("is_IsHas", 0.08), ("is_test", 0.2),
        ("is_in_test_code", 0.3), ("is_private", 0.25), ("is_dunder_method", 0.08),
        ("has_return", 0.6), ("uses_try_except", 0.15), ("uses_constants", 0.1),
    ):
        cols[flag] = (rng.random(n) < p).astype(float)
    cols["param_count"] = rng.poisson(2, n)
    cols["number_of_variable"] = rng.poisson(3, n)
    cols["call_expression_count"] = rng.poisson(4, n)
    cols["number_of_print"] = rng.poisson(0.3, n)
    cols["comment_ratio"] = np.round(rng.beta(1, 8, n), 3)
    cols["cyclomatic_complexity"] = rng.poisson(2, n) + 1
    cols["halstead_volume"] = np.round(rng.gamma(3, 40, n), 2)
    cols["max_nesting_depth"] = rng.poisson(1, n)
    X = np.column_stack([cols[name] for name in FEATURE_NAMES]).astype(np.float64)
    return X, y


def arrays_to_samples(X: np.ndarray, y: np.ndarray, pr_id: str = "synthetic") -> list[LabeledSample]:
    samples = []
    for i, (row, target) in enumerate(zip(X, y)):
        values = dict(zip(FEATURE_NAMES, row.tolist()))
        samples.append(
            LabeledSample(
                pr_id=pr_id,
                identity=MethodIdentity(f"synthetic/m{i // 100:03d}.py", (), f"method_{i:05d}"),
                label=SurvivalLabel.DELETED_METHOD if target else SurvivalLabel.SURVIVED,
                features=FeatureVector.from_dict(values),
                source_text=f"def method_{i:05d}():\n    pass",
            )
        )
    return samples
