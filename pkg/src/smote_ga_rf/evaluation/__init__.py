from ..splits import FoldPlan, stratified_folds
from .metrics import ClassMetrics, RocCurve, auc, class_metrics, confusion, roc_curve
from .pipeline import (
    GLOBAL_SCOPE_WARNING,
    MODES,
    SCOPES,
    EvalReport,
    PipelineConfig,
    Preprocessor,
    fit_preprocess,
    run_pipeline,
)

__all__ = [
    "ClassMetrics", "EvalReport", "FoldPlan", "GLOBAL_SCOPE_WARNING", "MODES", "PipelineConfig", "Preprocessor",
    "RocCurve", "SCOPES", "auc", "class_metrics", "confusion", "fit_preprocess", "roc_curve",
    "run_pipeline", "stratified_folds",
]
