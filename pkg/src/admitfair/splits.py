"""Index-level stratified splitting shared by evaluation, stacking and early stopping."""

from __future__ import annotations

import math

import numpy as np


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_holdout_indices(y, test_fraction: float, rng: np.random.Generator):
    """Return ``(train_idx, test_idx)`` with per-class test quotas.

    Each class gets ``floor(count * test_fraction)`` test rows; the leftover
    seats (so the total is ``round(n * test_fraction)``) go to the classes
    with the largest fractional remainders, ties to the smaller label.
    """
    y = np.asarray(y)
    test_fraction = round(float(test_fraction), 12)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must lie strictly between 0 and 1")
    classes, counts = np.unique(y, return_counts=True)
    small = classes[counts < 2]
    if small.size:
        raise ValueError(f"class {small[0]!r} has fewer than 2 rows; cannot stratify")
    exact = counts * test_fraction
    quota = np.floor(exact + 1e-9).astype(int)
    target = _round_half_up(len(y) * test_fraction)
    order = sorted(range(len(classes)), key=lambda i: (-(exact[i] - quota[i]), i))
    for i in order[: max(0, target - quota.sum())]:
        quota[i] += 1

    train, test = [], []
    for cls, q in zip(classes, quota):
        members = rng.permutation(np.flatnonzero(y == cls))
        test.append(members[:q])
        train.append(members[q:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_fold_ids(y, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each row a fold in ``0..k-1``; fold sizes and per-class counts differ by at most 1."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("need at least 2 folds")
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        raise ValueError(
            f"{k} folds requested but class {classes[counts.argmin()]!r} has only {counts.min()} rows "
            "(k must not exceed the minority-class count)")
    fold = np.empty(len(y), dtype=int)
    position = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(y == cls))
        fold[members] = (position + np.arange(len(members))) % k
        position += len(members)
    return fold


def stratified_kfold_indices(y, k: int, rng: np.random.Generator):
    fold = stratified_fold_ids(y, k, rng)
    return [(np.flatnonzero(fold != f), np.flatnonzero(fold == f)) for f in range(k)]
