"""Decision trees grown with information-gain splits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _accel


def entropy(counts):
    """Shannon entropy in bits of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or (counts < 0).any():
        raise ValueError("counts must be a 1-d vector of non-negative values")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero count vector is undefined")
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def best_split(x, y, rows, candidate_features, n_classes=None, min_samples_leaf=1):
    """Best information-gain split of ``rows`` over ``candidate_features``.

    Thresholds are midpoints between consecutive distinct values.  Gains within
    1e-12 of each other are ties; they go to the lower feature index, then the
    lower threshold.  Returns ``None`` when no
    split has positive gain.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if rows.size < 2:
        return None
    cnt = np.bincount(y[rows], minlength=n_classes)
    if np.count_nonzero(cnt) <= 1:
        return None
    k = _accel.kernels()
    cand = np.array(sorted(set(int(c) for c in candidate_features)), dtype=np.int64)
    parent_h = entropy(cnt)
    if _accel.get_backend() == "numba":
        m = rows.size
        f, t, g = k._best_split(
            x, y, rows, 0, m, cand, n_classes, min_samples_leaf, parent_h,
            np.empty(m), np.empty(m, dtype=np.int64), np.empty(m), np.zeros(n_classes, dtype=np.int64),
            np.zeros(n_classes, dtype=np.int64), np.zeros(n_classes, dtype=np.int64),
        )
    else:
        f, t, g = k._best_split(x, y, rows, cand, n_classes, min_samples_leaf, parent_h)
    if f < 0:
        return None
    return Split(int(f), float(t), float(g))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat-array tree.  ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    gains: np.ndarray | None = None

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def is_leaf(self):
        return self.feature < 0

    @property
    def labels(self):
        # argmax picks the lowest label on ties
        return np.argmax(self.counts, axis=1)

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def used_features(self):
        return set(int(f) for f in self.feature[self.feature >= 0])

    def apply(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _accel.kernels().apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X):
        return self.labels[self.apply(X)]

    def same_as(self, other):
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.counts, other.counts)
        )

    def to_nested(self, node=0):
        if self.feature[node] < 0:
            counts = [int(c) for c in self.counts[node]]
            return {"label": int(np.argmax(self.counts[node])), "counts": counts}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "counts": [int(c) for c in self.counts[node]],
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, doc, n_classes):
        feature, threshold, left, right, counts = [-1], [0.0], [-1], [-1], [None]

        def fill(node, d):
            c = d.get("counts")
            if c is None or len(c) != n_classes:
                raise ValueError("tree node has a malformed 'counts' field")
            counts[node] = [int(v) for v in c]
            if "feature" not in d:
                return
            feature[node] = int(d["feature"])
            threshold[node] = float(d["threshold"])
            # same numbering as the grower: allocate both children, expand left first
            lid = len(feature)
            left[node], right[node] = lid, lid + 1
            feature.extend([-1, -1])
            threshold.extend([0.0, 0.0])
            left.extend([-1, -1])
            right.extend([-1, -1])
            counts.extend([None, None])
            fill(lid, d["left"])
            fill(lid + 1, d["right"])

        fill(0, doc)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(counts, dtype=np.int64).reshape(len(feature), n_classes),
        )


def grow_tree(x, y, in_bag_rows, n_classes, max_features, min_samples_leaf=1, max_depth=None, seed=0):
    """Grow one tree on ``in_bag_rows`` (duplicates allowed)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    rows = np.ascontiguousarray(in_bag_rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("cannot grow a tree on zero rows")
    n_features = x.shape[1]
    if not 1 <= max_features <= n_features:
        raise ValueError(f"max_features must be in [1, {n_features}], got {max_features}")
    depth = -1 if max_depth is None else int(max_depth)
    out = _accel.kernels().grow_tree(
        x, y, rows, int(n_classes), int(max_features), int(min_samples_leaf), depth, np.uint64(seed)
    )
    return Tree(*out)
