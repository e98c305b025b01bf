"""Bagged random forest with out-of-bag error and permutation importance."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, _accel
from ..rng import derive_seed, substream
from .tree import Tree, grow_tree

MODEL_FORMAT = "smote-ga-rf/forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: int | str = "sqrt"
    min_samples_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.n_trees) < 1:
            raise ValueError("n_trees must be >= 1")
        if isinstance(self.max_features, str):
            if self.max_features not in ("sqrt", "all"):
                raise ValueError(f"max_features must be an int, 'sqrt' or 'all', got {self.max_features!r}")
        elif int(self.max_features) < 1:
            raise ValueError("max_features must be >= 1")
        if int(self.min_samples_leaf) < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and int(self.max_depth) < 0:
            raise ValueError("max_depth must be >= 0")

    def features_per_node(self, n_features):
        if self.max_features == "sqrt":
            return max(1, math.isqrt(n_features))
        if self.max_features == "all":
            return n_features
        k = int(self.max_features)
        if k > n_features:
            raise ValueError(f"max_features={k} exceeds the {n_features} available features")
        return k

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown forest options: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RandomForest:
    trees: tuple[Tree, ...]
    in_bag: np.ndarray | None  # (n_trees, n_rows) bootstrap multiplicities
    n_classes: int
    n_features: int
    config: ForestConfig
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()
    tree_seeds: tuple[int, ...] = field(default=(), repr=False)

    @property
    def n_trees(self):
        return len(self.trees)

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def votes(self, X):
        X = self._check(X)
        out = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def predict_proba(self, X):
        v = self.votes(X)
        return v / v.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.votes(X), axis=1)


def _tree_plan(kern, base, cfg, n_rows, t):
    """Bootstrap rows, their multiplicities and the kernel seed for tree ``t``."""
    seed = int(kern.tree_seed(np.uint64(base), t))
    if cfg.bootstrap:
        rows, counts = kern.bootstrap(n_rows, np.uint64(seed))
    else:
        rows, counts = np.arange(n_rows, dtype=np.int64), np.ones(n_rows, dtype=np.int64)
    return rows, counts, seed


def fit(ds, cfg=None, threads=1):
    """Grow ``cfg.n_trees`` trees on bootstrap resamples of ``ds``.

    Each tree draws its bootstrap and feature subsets from a splitmix stream
    keyed by ``(seed, tree index)``, so the forest is the same for any
    ``threads`` and either kernel backend.
    """
    cfg = cfg or ForestConfig()
    if ds.has_missing():
        raise ValueError("forest fitting needs data without missing values")
    if ds.n_features == 0:
        raise ValueError("cannot fit a forest on zero features")
    present = np.count_nonzero(np.bincount(ds.y, minlength=ds.n_classes))
    if present < 2:
        raise ValueError("training data holds a single class")
    x = np.ascontiguousarray(ds.x)
    y = np.ascontiguousarray(ds.y)
    k = cfg.features_per_node(ds.n_features)
    n = ds.n_rows
    kern = _accel.kernels()
    base = derive_seed(cfg.seed, "forest")

    def one(t):
        rows, counts, seed = _tree_plan(kern, base, cfg, n, t)
        tree = grow_tree(x, y, rows, ds.n_classes, k, cfg.min_samples_leaf, cfg.max_depth, seed)
        return tree, counts, seed

    if threads > 1 and cfg.n_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grown = list(pool.map(one, range(cfg.n_trees)))
    else:
        grown = [one(t) for t in range(cfg.n_trees)]
    trees = tuple(g[0] for g in grown)
    in_bag = np.stack([g[1] for g in grown]).astype(np.int64)
    return RandomForest(
        trees, in_bag, ds.n_classes, ds.n_features, cfg,
        tuple(ds.feature_names), tuple(ds.label_names), tuple(int(g[2]) for g in grown),
    )


def leave_out_fraction(rf):
    """Mean fraction of rows absent from each tree's bootstrap sample."""
    return float((rf.in_bag == 0).mean())


@dataclass(frozen=True)
class OobResult:
    error: float
    coverage: float
    n_covered: int


def oob_predictions(rf, ds):
    """OOB vote counts per row (trees whose bootstrap excluded the row)."""
    if rf.in_bag is None:
        raise ValueError("forest carries no bootstrap bookkeeping")
    if rf.in_bag.shape[1] != ds.n_rows:
        raise ValueError("dataset is not the one the forest was fitted on")
    x = np.ascontiguousarray(ds.x)
    votes = np.zeros((ds.n_rows, rf.n_classes), dtype=np.int64)
    for t, tree in enumerate(rf.trees):
        oob = np.flatnonzero(rf.in_bag[t] == 0)
        if oob.size:
            votes[oob, tree.predict(x[oob])] += 1
    return votes


def oob_error(rf, ds, detail=False):
    """Misclassification rate over rows with at least one out-of-bag tree."""
    if not rf.config.bootstrap:
        raise ValueError("OOB error needs a forest fitted with bootstrap")
    votes = oob_predictions(rf, ds)
    covered = votes.sum(axis=1) > 0
    n_cov = int(covered.sum())
    if n_cov == 0:
        raise ValueError("no row has an out-of-bag tree; increase n_trees")
    wrong = np.argmax(votes[covered], axis=1) != ds.y[covered]
    res = OobResult(float(wrong.mean()), n_cov / ds.n_rows, n_cov)
    return res if detail else res.error


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    importance: np.ndarray
    rank: np.ndarray  # 1 = most important

    def as_rows(self):
        order = np.argsort(self.rank, kind="stable")
        return [(self.feature_names[j], float(self.importance[j]), int(self.rank[j])) for j in order]


def variable_importance(rf, ds, seed=0):
    """Permutation importance on each tree's OOB rows, averaged over trees.

    For tree ``t`` and feature ``j`` the column is shuffled among that tree's
    OOB rows; the importance contribution is the drop in the tree's OOB
    accuracy.  A feature the tree never splits on contributes exactly 0.
    """
    if not rf.config.bootstrap:
        raise ValueError("variable importance needs a forest fitted with bootstrap")
    x = np.ascontiguousarray(ds.x)
    total = np.zeros(rf.n_features)
    for t, tree in enumerate(rf.trees):
        oob = np.flatnonzero(rf.in_bag[t] == 0)
        if oob.size == 0:
            continue
        xo = x[oob]
        yo = ds.y[oob]
        base = float((tree.predict(xo) == yo).mean())
        used = tree.used_features()
        for j in range(rf.n_features):
            if j not in used:
                continue
            rng = substream(seed, "importance", t, j)
            xp = xo.copy()
            xp[:, j] = xp[rng.permutation(oob.size), j]
            total[j] += base - float((tree.predict(xp) == yo).mean())
    imp = total / rf.n_trees
    order = sorted(range(rf.n_features), key=lambda j: (-imp[j], j))
    rank = np.empty(rf.n_features, dtype=np.int64)
    rank[order] = np.arange(1, rf.n_features + 1)
    names = rf.feature_names or tuple(str(j) for j in range(rf.n_features))
    return ImportanceReport(tuple(names), imp, rank)


# -- persistence -----------------------------------------------------------------


def forest_to_dict(rf, include_in_bag=False):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "tool_version": __version__,
        "config": rf.config.to_dict(),
        "n_classes": rf.n_classes,
        "n_features": rf.n_features,
        "feature_names": list(rf.feature_names),
        "label_names": list(rf.label_names),
        "trees": [t.to_nested() for t in rf.trees],
    }
    if include_in_bag and rf.in_bag is not None:
        doc["in_bag"] = rf.in_bag.tolist()
    return doc


def forest_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a forest model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    try:
        n_classes = int(doc["n_classes"])
        trees = tuple(Tree.from_nested(t, n_classes) for t in doc["trees"])
        in_bag = np.array(doc["in_bag"], dtype=np.int64) if "in_bag" in doc else None
        return RandomForest(
            trees, in_bag, n_classes, int(doc["n_features"]), ForestConfig.from_dict(doc["config"]),
            tuple(doc.get("feature_names", ())), tuple(doc.get("label_names", ())),
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"corrupt model document: {e}") from None


def save_forest(rf, path, include_in_bag=False):
    Path(path).write_text(json.dumps(forest_to_dict(rf, include_in_bag)) + "\n", encoding="utf-8")


def load_forest(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"model file {path} is not valid JSON: {e}") from None
    return forest_from_dict(doc)
