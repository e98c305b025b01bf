import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smote_ga_rf import _accel
from smote_ga_rf.forest import (
    ForestConfig,
    RandomForest,
    Tree,
    best_split,
    entropy,
    fit,
    forest_from_dict,
    forest_to_dict,
    grow_tree,
    leave_out_fraction,
    load_forest,
    oob_error,
    save_forest,
    variable_importance,
)

from conftest import gaussian_ds, make_ds


# -- reference CART: exhaustive split search, written independently of the kernels --


EPS = 1e-12


def ref_entropy(counts):
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c)


def ref_cart(x, y, rows, n_classes, min_leaf=1):
    counts = [0] * n_classes
    for r in rows:
        counts[y[r]] += 1
    node = {"counts": counts}
    m = len(rows)
    if sum(1 for c in counts if c) <= 1 or m < 2 * min_leaf:
        node["label"] = counts.index(max(counts))
        return node
    parent = ref_entropy(counts)
    per_feature = []
    for f in range(x.shape[1]):
        values = sorted(set(x[r, f] for r in rows))
        cands = []
        for a, b in zip(values, values[1:]):
            t = (a + b) / 2
            if t >= b:
                t = a
            lrows = [r for r in rows if x[r, f] <= t]
            rrows = [r for r in rows if x[r, f] > t]
            if len(lrows) < min_leaf or len(rrows) < min_leaf:
                continue
            lc = [sum(1 for r in lrows if y[r] == c) for c in range(n_classes)]
            rc = [sum(1 for r in rrows if y[r] == c) for c in range(n_classes)]
            g = parent - len(lrows) / m * ref_entropy(lc) - len(rrows) / m * ref_entropy(rc)
            cands.append((g, t, lrows, rrows))
        if cands:
            top = max(c[0] for c in cands)
            per_feature.append((f, next(c for c in cands if c[0] >= top - EPS)))
    if not per_feature:
        node["label"] = counts.index(max(counts))
        return node
    best = max(c[0] for _, c in per_feature)
    if best <= EPS:
        node["label"] = counts.index(max(counts))
        return node
    f, (g, t, lrows, rrows) = next((f, c) for f, c in per_feature if c[0] >= best - EPS)
    node.update(feature=f, threshold=t,
                left=ref_cart(x, y, lrows, n_classes, min_leaf),
                right=ref_cart(x, y, rrows, n_classes, min_leaf))
    return node


def cart_datasets(count=10, seed=123):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(12, 51))
        f = int(rng.integers(1, 5))
        C = int(rng.integers(2, 4))
        x = rng.normal(size=(n, f))
        if i % 2:
            x = np.round(x * 2)  # coarse values: many tied values and tied gains
        w = rng.normal(size=f)
        score = x @ w + rng.normal(scale=0.7, size=n)
        y = np.digitize(score, np.quantile(score, np.linspace(0, 1, C + 1)[1:-1]))
        out.append((x, y.astype(np.int64), C))
    return out


@pytest.mark.parametrize("case", range(10))
def test_single_tree_matches_reference_cart(backend, case):
    x, y, C = cart_datasets()[case]
    ds = make_ds(x, y, label_names=[str(c) for c in range(C)])
    rf = fit(ds, ForestConfig(n_trees=1, max_features="all", bootstrap=False, seed=case))
    assert rf.trees[0].to_nested() == ref_cart(x, y, list(range(len(y))), C)


def test_reference_cart_min_leaf(backend):
    x, y, C = cart_datasets()[3]
    ds = make_ds(x, y, label_names=[str(c) for c in range(C)])
    rf = fit(ds, ForestConfig(n_trees=1, max_features="all", bootstrap=False, min_samples_leaf=3))
    assert rf.trees[0].to_nested() == ref_cart(x, y, list(range(len(y))), C, min_leaf=3)


# -- entropy / best_split / grow_tree ------------------------------------------------


@pytest.mark.parametrize("counts, h", [([4, 4], 1.0), ([8, 0], 0.0), ([1, 1, 1, 1], 2.0)])
def test_entropy_values(counts, h):
    assert entropy(counts) == h


def test_entropy_zero_counts_error():
    with pytest.raises(ValueError):
        entropy([0, 0])


def test_best_split_midpoint(backend):
    x = np.array([[0.1], [0.2], [0.8], [0.9]])
    s = best_split(x, np.array([0, 0, 1, 1]), np.arange(4), [0])
    assert s.feature == 0 and s.threshold == 0.5 and s.gain == 1.0


def test_best_split_pure_and_constant(backend):
    x = np.array([[1.0, 0.1], [1.0, 0.2], [1.0, 0.8], [1.0, 0.9]])
    assert best_split(x, np.zeros(4, int), np.arange(4), [0, 1]) is None
    assert best_split(x, np.array([0, 0, 1, 1]), np.arange(4), [0]) is None
    assert best_split(x, np.array([0, 0, 1, 1]), np.arange(4), [0, 1]).feature == 1


def test_best_split_tie_goes_to_lower_feature(backend):
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    s = best_split(x, np.array([0, 0, 1, 1]), np.arange(4), [1, 0])
    assert s.feature == 0


def test_best_split_tie_goes_to_lower_threshold(backend):
    # thresholds 0.5 and 2.5 both isolate one pure pair with the same gain
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 1, 1, 0])
    s = best_split(x, y, np.arange(4), [0])
    assert s.threshold == 0.5


def test_grow_tree_single_class(backend):
    t = grow_tree(np.random.rand(5, 2), np.ones(5, int), np.arange(5), 2, 2)
    assert t.n_nodes == 1 and t.labels[0] == 1


def test_grow_tree_four_points(backend):
    x = np.array([[0.1], [0.2], [0.8], [0.9]])
    t = grow_tree(x, np.array([0, 0, 1, 1]), np.arange(4), 2, 1)
    assert t.to_nested() == {
        "feature": 0, "threshold": 0.5, "counts": [2, 2],
        "left": {"label": 0, "counts": [2, 0]}, "right": {"label": 1, "counts": [0, 2]},
    }


def test_grow_tree_depth_zero(backend):
    x = np.random.default_rng(0).random((7, 2))
    t = grow_tree(x, np.array([0, 1, 1, 0, 1, 1, 0]), np.arange(7), 2, 2, max_depth=0)
    assert t.n_nodes == 1 and t.labels[0] == 1


def test_grow_tree_counts_bootstrap_multiplicity(backend):
    x = np.array([[0.0], [1.0]])
    t = grow_tree(x, np.array([0, 1]), np.array([0, 0, 0, 1]), 2, 1)
    assert t.counts[0].tolist() == [3, 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 6), st.integers(2, 3), st.integers(0, 10**9),
       st.booleans(), st.integers(1, 3))
def test_tree_invariants(n, f, C, seed, coarse, min_leaf):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, f))
    if coarse:
        x = np.round(x)
    y = rng.integers(0, C, n)
    rows = rng.integers(0, n, n)
    t = grow_tree(x, y, rows, C, max(1, f // 2), min_leaf, None, seed)
    internal = np.flatnonzero(t.feature >= 0)
    assert np.all(t.gains[internal] > 0)
    for node in internal:
        assert np.array_equal(t.counts[t.left[node]] + t.counts[t.right[node]], t.counts[node])
        assert t.counts[t.left[node]].sum() >= min_leaf and t.counts[t.right[node]].sum() >= min_leaf
    assert t.counts[0].sum() == n


# -- backends ------------------------------------------------------------------------


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
@settings(max_examples=40, deadline=None)
@given(st.integers(2, 80), st.integers(1, 8), st.integers(2, 4), st.integers(0, 2**62),
       st.booleans(), st.one_of(st.none(), st.integers(0, 6)))
def test_backends_grow_identical_trees(n, f, C, seed, coarse, depth):
    rng = np.random.default_rng(seed % 2**32)
    x = rng.normal(size=(n, f))
    if coarse:
        x = np.round(x)
    y = rng.integers(0, C, n)
    rows = rng.integers(0, n, n)
    k = int(rng.integers(1, f + 1))
    trees = {}
    for b in ("numba", "numpy"):
        with _accel.use_backend(b):
            trees[b] = grow_tree(x, y, rows, C, k, 1, depth, seed)
            assert np.array_equal(trees[b].apply(x), trees["numba"].apply(x))
    assert trees["numba"].same_as(trees["numpy"])


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_backends_identical_forests():
    ds = gaussian_ds(120, 6, informative=2, seed=4)
    out = {}
    for b in ("numba", "numpy"):
        with _accel.use_backend(b):
            out[b] = fit(ds, ForestConfig(n_trees=15, seed=8))
    assert np.array_equal(out["numba"].in_bag, out["numpy"].in_bag)
    assert all(a.same_as(b) for a, b in zip(out["numba"].trees, out["numpy"].trees))


def test_backend_env_names():
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


# -- forest ----------------------------------------------------------------------------


def test_fit_deterministic_and_thread_independent():
    ds = gaussian_ds(80, 5, seed=1)
    a = fit(ds, ForestConfig(n_trees=20, seed=3))
    b = fit(ds, ForestConfig(n_trees=20, seed=3), threads=4)
    c = fit(ds, ForestConfig(n_trees=20, seed=4))
    assert all(s.same_as(t) for s, t in zip(a.trees, b.trees))
    assert np.array_equal(a.in_bag, b.in_bag)
    assert not np.array_equal(a.in_bag, c.in_bag)


def test_fit_shapes_and_inbag():
    ds = gaussian_ds(54, 27, seed=0)
    rf = fit(ds, ForestConfig(n_trees=100))
    assert rf.n_trees == 100 and rf.in_bag.shape == (100, 54)
    assert np.all(rf.in_bag.sum(axis=1) == 54)
    assert abs(leave_out_fraction(rf) - math.exp(-1)) < 0.05


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError, match="single class"):
        fit(make_ds(np.random.rand(5, 2), np.zeros(5, int)))
    with pytest.raises(ValueError, match="missing"):
        fit(make_ds([[1.0], [np.nan]], [0, 1]))
    with pytest.raises(ValueError):
        ForestConfig(max_features=9).features_per_node(3)


def test_features_per_node():
    assert ForestConfig().features_per_node(27) == 5
    assert ForestConfig().features_per_node(1) == 1
    assert ForestConfig(max_features="all").features_per_node(7) == 7


def stump(feature, threshold, left_label, right_label, n_classes=2):
    counts = np.zeros((3, n_classes), dtype=np.int64)
    counts[1, left_label] = 1
    counts[2, right_label] = 1
    counts[0] = counts[1] + counts[2]
    return Tree(np.array([feature, -1, -1]), np.array([threshold, 0.0, 0.0]),
                np.array([1, -1, -1]), np.array([2, -1, -1]), counts)


def forest_of(trees, n_features=1):
    return RandomForest(tuple(trees), None, 2, n_features, ForestConfig(n_trees=len(trees)))


def test_vote_arithmetic():
    trees = [stump(0, 0.5, 1, 1)] * 7 + [stump(0, 0.5, 0, 0)] * 3
    rf = forest_of(trees)
    assert rf.predict_proba([[0.0]]).tolist() == [[0.3, 0.7]]
    assert rf.predict([[0.0]]).tolist() == [1]


def test_vote_tie_goes_to_lower_label():
    rf = forest_of([stump(0, 0.5, 0, 1), stump(0, 0.5, 1, 0)])
    assert rf.predict_proba([[0.0], [1.0]]).tolist() == [[0.5, 0.5], [0.5, 0.5]]
    assert rf.predict([[0.0], [1.0]]).tolist() == [0, 0]


def test_identical_stumps_one_hot():
    rf = forest_of([stump(0, 0.5, 0, 1)] * 4)
    assert rf.predict_proba([[0.2], [0.9]]).tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_predict_dimension_mismatch():
    rf = fit(gaussian_ds(30, 3), ForestConfig(n_trees=3))
    with pytest.raises(ValueError, match="expected 3 features"):
        rf.predict(np.zeros((2, 4)))


def test_proba_sums_to_one():
    ds = gaussian_ds(60, 4, seed=2)
    p = fit(ds, ForestConfig(n_trees=11)).predict_proba(np.random.default_rng(0).normal(size=(50, 4)))
    assert np.all(np.abs(p.sum(axis=1) - 1.0) <= 1e-12)


def test_full_trees_fit_training_data_at_least_as_well_as_pruned():
    ds = gaussian_ds(100, 4, sep=1.0, seed=5)
    acc = {}
    for depth in (None, 3, 1):
        rf = fit(ds, ForestConfig(n_trees=5, max_features="all", bootstrap=False, max_depth=depth))
        acc[depth] = (rf.predict(ds.x) == ds.y).mean()
    assert acc[None] == 1.0
    assert acc[None] >= acc[3] >= acc[1]


# -- OOB and importance -----------------------------------------------------------------


def test_oob_separable():
    ds = gaussian_ds(400, 3, informative=3, sep=4.0, seed=9)
    assert oob_error(fit(ds, ForestConfig(n_trees=100)), ds) <= 0.05


def test_oob_null():
    rng = np.random.default_rng(21)
    ds = make_ds(rng.normal(size=(400, 2)), rng.integers(0, 2, 400))
    assert abs(oob_error(fit(ds, ForestConfig(n_trees=100, seed=2)), ds) - 0.5) <= 0.1


def test_oob_single_tree_coverage():
    ds = gaussian_ds(1000, 2, seed=3)
    res = oob_error(fit(ds, ForestConfig(n_trees=1)), ds, detail=True)
    assert abs(res.coverage - math.exp(-1)) < 0.05


def test_oob_requires_bootstrap():
    ds = gaussian_ds(20, 2)
    with pytest.raises(ValueError, match="bootstrap"):
        oob_error(fit(ds, ForestConfig(n_trees=2, bootstrap=False)), ds)


def test_importance_ranks_informative_first():
    ds = gaussian_ds(300, 6, informative=1, sep=3.0, seed=4)
    rep = variable_importance(fit(ds, ForestConfig(n_trees=50, seed=1)), ds, seed=0)
    assert rep.rank[0] == 1
    assert rep.as_rows()[0][0] == "f0"
    again = variable_importance(fit(ds, ForestConfig(n_trees=50, seed=1)), ds, seed=0)
    assert np.array_equal(rep.importance, again.importance)


def test_importance_unused_feature_exactly_zero():
    ds = gaussian_ds(100, 3, informative=1, sep=4.0, seed=6)
    x = ds.x.copy()
    x[:, 2] = 1.0  # constant: never split on
    ds = ds.replace(x=x)
    rf = fit(ds, ForestConfig(n_trees=20))
    assert all(2 not in t.used_features() for t in rf.trees)
    assert variable_importance(rf, ds).importance[2] == 0.0


# -- persistence ------------------------------------------------------------------------


def test_model_roundtrip(tmp_path):
    ds = gaussian_ds(80, 5, seed=7)
    rf = fit(ds, ForestConfig(n_trees=10, seed=2))
    p = tmp_path / "model.json"
    save_forest(rf, p, include_in_bag=True)
    back = load_forest(p)
    probe = np.random.default_rng(1).normal(size=(100, 5))
    assert np.array_equal(rf.predict_proba(probe), back.predict_proba(probe))
    assert all(a.same_as(b) for a, b in zip(rf.trees, back.trees))
    assert np.array_equal(back.in_bag, rf.in_bag)
    assert back.config == rf.config


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(format="other"),
    lambda d: d.update(version=99),
    lambda d: d.pop("trees"),
    lambda d: d["trees"][0].update(counts=[1]),
])
def test_corrupt_model_rejected(mutate):
    doc = forest_to_dict(fit(gaussian_ds(20, 2), ForestConfig(n_trees=2)))
    mutate(doc)
    with pytest.raises(ValueError):
        forest_from_dict(doc)
