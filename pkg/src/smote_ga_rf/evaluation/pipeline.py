"""Cross-validated runs of the three pipeline variants.

``rf_only``      forest on the preprocessed data
``smote_rf``     SMOTE on the training data, then the forest
``smote_ga_rf``  SMOTE, GA feature selection on the balanced training data, then the forest

With ``smote_scope="per_fold"`` everything that learns from data (imputation,
scaling, degenerate-column removal, SMOTE, GA) is fitted on each training
partition only.  ``smote_scope="global"`` oversamples the whole dataset before
folding, which lets synthetic copies of test rows into training; reports from
that scope carry a warning.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import dataset as dsmod
from ..forest import ForestConfig, fit
from ..gafs import FitnessEvaluator, FitnessSpec, GaConfig, run_ga, selected_names
from ..rng import derive_seed
from ..smote import SmoteConfig, minority_label, oversample
from ..splits import stratified_folds
from .metrics import auc, class_metrics, confusion, roc_curve

MODES = ("rf_only", "smote_rf", "smote_ga_rf")
SCOPES = ("per_fold", "global")

GLOBAL_SCOPE_WARNING = (
    "smote_scope=global: SMOTE ran on the full dataset before the CV split, so synthetic rows "
    "interpolated from test rows sit in the training folds and test folds contain synthetic rows; "
    "scores from this run are optimistically biased"
)


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "smote_ga_rf"
    smote_scope: str = "per_fold"
    cv_folds: int = 10
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    fitness: FitnessSpec = field(default_factory=FitnessSpec)
    forest: ForestConfig = field(default_factory=ForestConfig)
    seed: int = 0
    positive_class: int | None = None  # None: the minority class

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.smote_scope not in SCOPES:
            raise ValueError(f"smote_scope must be one of {SCOPES}, got {self.smote_scope!r}")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")

    def to_dict(self):
        return {
            "mode": self.mode,
            "smote_scope": self.smote_scope,
            "cv_folds": self.cv_folds,
            "seed": self.seed,
            "positive_class": self.positive_class,
            "smote": asdict(self.smote),
            "ga": self.ga.to_dict(),
            "fitness": self.fitness.to_dict(),
            "forest": self.forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kw = {k: d.pop(k) for k in ("mode", "smote_scope", "cv_folds", "seed", "positive_class") if k in d}
        if "smote" in d:
            kw["smote"] = SmoteConfig(**d.pop("smote"))
        if "ga" in d:
            kw["ga"] = GaConfig(**d.pop("ga"))
        if "forest" in d:
            kw["forest"] = ForestConfig.from_dict(d.pop("forest"))
        if "fitness" in d:
            f = dict(d.pop("fitness"))
            if "forest" in f:
                f["forest"] = ForestConfig.from_dict(f["forest"])
            kw["fitness"] = FitnessSpec(**f)
        if d:
            raise ValueError(f"unknown pipeline options: {sorted(d)}")
        return cls(**kw)


@dataclass(frozen=True)
class Preprocessor:
    keep: np.ndarray          # boolean column mask
    dropped: tuple[str, ...]
    fill: np.ndarray          # over kept columns
    scale: dsmod.ScaleParams

    def apply(self, ds):
        out = dsmod.apply_impute(ds.select(self.keep), self.fill)
        return dsmod.apply_scale(out, self.scale)


def fit_preprocess(train):
    """Drop degenerate columns, then learn imputation and min-max scaling on ``train``."""
    bad = dsmod.degenerate_columns(train)
    if bad.all():
        raise ValueError("every feature is degenerate on the training partition")
    kept = train.select(~bad)
    fill = dsmod.fit_impute(kept)
    scale = dsmod.fit_scale(dsmod.apply_impute(kept, fill))
    dropped = tuple(s.name for s, b in zip(train.specs, bad) if b)
    return Preprocessor(~bad, dropped, fill, scale)


@dataclass
class FoldReport:
    index: int
    n_train: int
    n_train_fitted: int
    n_test: int
    test_class_counts: list
    accuracy: float
    n_synthetic: int = 0
    dropped_features: list = field(default_factory=list)
    selected_features: list | None = None
    ga_best_fitness: float | None = None
    smote_source_rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class EvalReport:
    config: PipelineConfig
    label_names: tuple
    positive_class: int
    n_rows: int
    confusion: np.ndarray
    accuracy: float
    sensitivity: tuple
    specificity: tuple
    precision: tuple
    f1: tuple
    g_mean: float
    auc: float
    roc_fpr: np.ndarray
    roc_tpr: np.ndarray
    folds: list
    predictions: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    warnings: list = field(default_factory=list)
    metric_flags: list = field(default_factory=list)
    feature_names: tuple = ()
    selection_counts: dict | None = None
    selected_features: list | None = None
    ga_histories: list = field(default_factory=list)

    def per_class(self):
        return {
            self.label_names[c]: {
                "sensitivity": self.sensitivity[c],
                "specificity": self.specificity[c],
                "precision": self.precision[c],
                "f1": self.f1[c],
            }
            for c in range(len(self.label_names))
        }

    def to_dict(self):
        d = {
            "mode": self.config.mode,
            "smote_scope": self.config.smote_scope,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "label_names": list(self.label_names),
            "positive_class": self.label_names[self.positive_class],
            "n_rows": self.n_rows,
            "accuracy": self.accuracy,
            "g_mean": self.g_mean,
            "auc": self.auc,
            "per_class": self.per_class(),
            "confusion_matrix": self.confusion.tolist(),
            "roc": {"fpr": self.roc_fpr.tolist(), "tpr": self.roc_tpr.tolist()},
            "folds": [f.to_dict() for f in self.folds],
            "warnings": list(self.warnings),
            "metric_flags": list(self.metric_flags),
        }
        if self.selected_features is not None:
            d["selected_features"] = list(self.selected_features)
            d["selection_counts"] = dict(self.selection_counts)
        return d

    def table_row(self):
        """Flat row in the layout of the comparison table."""
        row = {"mode": self.config.mode, "smote_scope": self.config.smote_scope, "accuracy": self.accuracy}
        for metric in ("sensitivity", "specificity", "f1"):
            values = getattr(self, metric)
            for c, name in enumerate(self.label_names):
                row[f"{metric}_{name}"] = values[c]
        row["g_mean"] = self.g_mean
        row["auc"] = self.auc
        return row


def _fold_seed(cfg, purpose, fold):
    return derive_seed(cfg.seed, purpose, fold)


def run_pipeline(ds, cfg=None, threads=1):
    """Cross-validate ``cfg.mode`` on ``ds`` and pool the held-out predictions."""
    cfg = cfg or PipelineConfig()
    if ds.n_rows == 0:
        raise ValueError("dataset is empty")
    if ds.n_features == 0:
        raise ValueError("dataset has no features")
    counts = ds.class_counts()
    if np.count_nonzero(counts) != 2 or ds.n_classes != 2:
        raise ValueError("the pipeline handles binary classification only")
    positive = minority_label(ds.y) if cfg.positive_class is None else int(cfg.positive_class)
    warnings = []
    uses_smote = cfg.mode != "rf_only"

    work = ds
    n_original = ds.n_rows
    if uses_smote and cfg.smote_scope == "global":
        pre = fit_preprocess(ds)
        res = oversample(pre.apply(ds), replace(cfg.smote, seed=derive_seed(cfg.seed, "smote-global")))
        work = res.dataset
        warnings.append(GLOBAL_SCOPE_WARNING)
        warnings.extend(res.warnings)
        if pre.dropped:
            warnings.append(f"dropped degenerate features before global SMOTE: {list(pre.dropped)}")

    plan = stratified_folds(work.y, cfg.cv_folds, derive_seed(cfg.seed, "cv"))
    warnings.extend(plan.warnings)

    n = work.n_rows
    preds = np.full(n, -1, dtype=np.int64)
    scores = np.full(n, np.nan)
    folds, histories = [], []
    sel_counts = {}

    for i in range(len(plan)):
        train_idx, test_idx = plan.train_test(i, n)
        train, test = work.take(train_idx), work.take(test_idx)
        pre = fit_preprocess(train)
        train, test = pre.apply(train), pre.apply(test)
        fold_warn = []
        test_counts = np.bincount(test.y, minlength=work.n_classes)
        for c in np.flatnonzero(test_counts == 0):
            fold_warn.append(f"no test rows of class {work.label_names[c]}")

        n_syn, sources = 0, []
        if uses_smote and cfg.smote_scope == "per_fold":
            res = oversample(train, replace(cfg.smote, seed=_fold_seed(cfg, "smote", i)))
            n_syn = len(res.provenance)
            # provenance indexes the fold's training rows; map back to dataset rows
            used = np.union1d(res.provenance["base_index"], res.provenance["neighbor_index"])
            sources = train_idx[used].tolist()
            fold_warn.extend(res.warnings)
            train = res.dataset

        selected, ga_best = None, None
        if cfg.mode == "smote_ga_rf":
            spec = replace(cfg.fitness, fitness_seed=_fold_seed(cfg, "fitness", i))
            ga_cfg = replace(cfg.ga, seed=_fold_seed(cfg, "ga", i))
            evaluator = FitnessEvaluator(train, spec, threads=threads)
            result = run_ga(train, ga_cfg, fitness=evaluator)
            mask = result.best_mask
            selected = selected_names(mask, train.feature_names)
            ga_best = result.best_fitness
            histories.append(result.history)
            train, test = train.select(mask), test.select(mask)
            for name in selected:
                sel_counts[name] = sel_counts.get(name, 0) + 1

        rf = fit(train, replace(cfg.forest, seed=_fold_seed(cfg, "forest", i)), threads=threads)
        proba = rf.predict_proba(test.x)
        fold_pred = np.argmax(proba, axis=1)
        preds[test_idx] = fold_pred
        scores[test_idx] = proba[:, positive]

        folds.append(FoldReport(
            index=i,
            n_train=int(train_idx.size),
            n_train_fitted=train.n_rows,
            n_test=int(test_idx.size),
            test_class_counts=test_counts.tolist(),
            accuracy=float((fold_pred == test.y).mean()),
            n_synthetic=n_syn,
            dropped_features=list(pre.dropped),
            selected_features=selected,
            ga_best_fitness=ga_best,
            smote_source_rows=sources,
            warnings=fold_warn,
        ))

    cm = confusion(preds, work.y, work.n_classes)
    m = class_metrics(cm)
    curve = roc_curve(scores, work.y, positive)
    report = EvalReport(
        config=cfg,
        label_names=tuple(work.label_names),
        positive_class=positive,
        n_rows=n,
        confusion=cm,
        accuracy=m.accuracy,
        sensitivity=m.sensitivity,
        specificity=m.specificity,
        precision=m.precision,
        f1=m.f1,
        g_mean=m.g_mean,
        auc=auc(curve),
        roc_fpr=curve.fpr,
        roc_tpr=curve.tpr,
        folds=folds,
        predictions=preds,
        scores=scores,
        labels=work.y.copy(),
        warnings=warnings,
        metric_flags=list(m.flags),
        feature_names=tuple(ds.feature_names),
        ga_histories=histories,
    )
    if n != n_original:
        report.warnings.append(f"evaluated {n} rows: {n_original} original plus {n - n_original} synthetic")
    if cfg.mode == "smote_ga_rf":
        order = [name for name in ds.feature_names if name in sel_counts]
        report.selection_counts = {name: sel_counts[name] for name in order}
        report.selected_features = [name for name in order if 2 * sel_counts[name] >= len(plan)]
    return report
