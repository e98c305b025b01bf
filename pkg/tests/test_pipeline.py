from dataclasses import replace

import numpy as np
import pytest

from smote_ga_rf.dataset import generate_synthetic, paper_shaped_config
from smote_ga_rf.evaluation import PipelineConfig, run_pipeline
from smote_ga_rf.evaluation.pipeline import GLOBAL_SCOPE_WARNING, fit_preprocess
from smote_ga_rf.forest import ForestConfig
from smote_ga_rf.gafs import FitnessSpec, GaConfig
from smote_ga_rf.rng import derive_seed
from smote_ga_rf.splits import stratified_folds

from conftest import make_ds


def imbalanced(n_maj=47, n_min=7, f=5, sep=2.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_maj + n_min, f))
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    x[:, 0] += sep * y
    return make_ds(x, y, label_names=["SN", "AST"])


def quick(mode, **kw):
    return PipelineConfig(
        mode=mode,
        cv_folds=kw.pop("cv_folds", 5),
        forest=ForestConfig(n_trees=30),
        ga=GaConfig(population_size=8, generations=2),
        fitness=FitnessSpec(forest=ForestConfig(n_trees=8)),
        **kw,
    )


@pytest.mark.parametrize("mode", ["rf_only", "smote_rf", "smote_ga_rf"])
def test_pooled_report_shape(mode):
    ds = imbalanced()
    rep = run_pipeline(ds, quick(mode))
    assert rep.confusion.sum() == ds.n_rows == rep.n_rows
    assert np.all(rep.predictions >= 0) and not np.isnan(rep.scores).any()
    assert rep.positive_class == 1
    for v in (rep.accuracy, rep.g_mean, rep.auc, *rep.sensitivity, *rep.specificity, *rep.f1):
        assert 0.0 <= v <= 1.0
    assert sum(f.n_test for f in rep.folds) == ds.n_rows


def test_synthetic_rows_stay_out_of_test_folds():
    ds = imbalanced()
    rep = run_pipeline(ds, quick("smote_rf"))
    assert rep.n_rows == ds.n_rows
    for f in rep.folds:
        # synthetic rows only ever enlarge the training partition
        assert f.n_synthetic > 0
        assert f.n_train_fitted == f.n_train + f.n_synthetic
        assert all(0 <= r < ds.n_rows for r in f.smote_source_rows)


def test_smote_sources_never_in_their_test_fold():
    ds = imbalanced(seed=3)
    cfg = quick("smote_rf")
    rep = run_pipeline(ds, cfg)
    plan = stratified_folds(ds.y, cfg.cv_folds, derive_seed(cfg.seed, "cv"))
    for f, test in zip(rep.folds, plan):
        assert not set(f.smote_source_rows) & set(test.tolist())


def test_paper_folds_warn_about_missing_minority():
    rep = run_pipeline(imbalanced(), quick("rf_only", cv_folds=10))
    empty = [f for f in rep.folds if f.test_class_counts[1] == 0]
    assert len(empty) == 3
    assert sum(1 for w in rep.warnings if "no test rows" in w) == 3


def test_deterministic_across_runs_and_threads():
    ds = imbalanced(seed=5)
    a = run_pipeline(ds, quick("smote_ga_rf"), threads=1)
    b = run_pipeline(ds, quick("smote_ga_rf"), threads=3)
    assert a.scores.tobytes() == b.scores.tobytes()
    assert a.to_dict() == b.to_dict()


def test_seed_changes_result():
    ds = imbalanced(seed=5)
    a = run_pipeline(ds, quick("smote_rf", seed=1))
    b = run_pipeline(ds, quick("smote_rf", seed=2))
    assert a.scores.tobytes() != b.scores.tobytes()


def test_global_scope_warns_and_grows():
    ds = imbalanced()
    rep = run_pipeline(ds, quick("smote_rf", smote_scope="global"))
    assert GLOBAL_SCOPE_WARNING in rep.warnings
    assert rep.n_rows == 94
    assert rep.confusion.sum() == 94


def test_per_fold_scope_has_no_leak_warning():
    rep = run_pipeline(imbalanced(), quick("smote_rf"))
    assert GLOBAL_SCOPE_WARNING not in rep.warnings


def test_ga_selection_report():
    ds = imbalanced(f=6, sep=3.0)
    rep = run_pipeline(ds, quick("smote_ga_rf"))
    assert len(rep.ga_histories) == 5
    assert all(len(h) == 3 for h in rep.ga_histories)
    assert all(f.selected_features for f in rep.folds)
    assert set(rep.selection_counts) <= set(ds.feature_names)
    assert all(rep.selection_counts[n] >= 3 for n in rep.selected_features)


def test_smote_helps_minority_sensitivity_on_paper_shaped_data():
    ds = generate_synthetic(paper_shaped_config())
    base = PipelineConfig(forest=ForestConfig(n_trees=100), cv_folds=10)
    rf = run_pipeline(ds, replace(base, mode="rf_only"))
    sm = run_pipeline(ds, replace(base, mode="smote_rf"))
    assert sm.sensitivity[sm.positive_class] >= rf.sensitivity[rf.positive_class]


def test_degenerate_columns_dropped_per_fold():
    ds = imbalanced(f=3)
    x = ds.x.copy()
    x[:, 2] = 4.0
    ds2 = make_ds(x, ds.y)
    rep = run_pipeline(ds2, quick("rf_only"))
    assert all(f.dropped_features == ["f2"] for f in rep.folds)


def test_preprocess_all_degenerate():
    ds = make_ds(np.ones((6, 2)), [0, 0, 0, 1, 1, 1])
    with pytest.raises(ValueError, match="degenerate"):
        fit_preprocess(ds)


def test_rejects_non_binary_and_empty():
    with pytest.raises(ValueError):
        run_pipeline(make_ds(np.arange(9.0), [0, 0, 0, 1, 1, 1, 2, 2, 2]), quick("rf_only", cv_folds=3))
    with pytest.raises(ValueError):
        PipelineConfig(mode="ga_only")
    with pytest.raises(ValueError):
        PipelineConfig(smote_scope="nowhere")


def test_config_round_trip():
    cfg = quick("smote_ga_rf", seed=11)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"bogus": 1})


def test_table_row_layout():
    rep = run_pipeline(imbalanced(), quick("rf_only"))
    row = rep.table_row()
    assert list(row) == [
        "mode", "smote_scope", "accuracy",
        "sensitivity_SN", "sensitivity_AST", "specificity_SN", "specificity_AST",
        "f1_SN", "f1_AST", "g_mean", "auc",
    ]
