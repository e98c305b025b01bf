"""Stratified k-fold assignment."""
from dataclasses import dataclass

import numpy as np

from .rng import substream


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple          # k arrays of test row indices, each sorted
    warnings: tuple = ()

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def train_test(self, i, n_rows):
        test = self.folds[i]
        mask = np.ones(n_rows, dtype=bool)
        mask[test] = False
        return np.flatnonzero(mask), test


def stratified_folds(y, k, seed=0):
    """Deal each class's shuffled rows round-robin over ``k`` folds.

    Dealing continues where the previous class stopped, so both the per-class
    and the total fold sizes differ by at most one.  Folds that end up without
    some class are reported in ``warnings``.
    """
    y = np.asarray(y, dtype=np.int64)
    n = y.size
    k = int(k)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"{k} folds requested for {n} rows")
    rng = substream(seed, "folds")
    buckets = [[] for _ in range(k)]
    pos = 0
    classes = np.flatnonzero(np.bincount(y))
    for c in classes:
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        for r in idx:
            buckets[pos % k].append(int(r))
            pos += 1
    folds = tuple(np.array(sorted(b), dtype=np.int64) for b in buckets)
    warnings = []
    for i, f in enumerate(folds):
        missing = [int(c) for c in classes if not np.any(y[f] == c)]
        if missing:
            warnings.append(f"fold {i} has no test rows of class(es) {missing}")
    return FoldPlan(folds, tuple(warnings))
