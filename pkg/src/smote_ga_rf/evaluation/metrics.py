"""Confusion matrices, per-class rates, G-mean, ROC and AUC."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def confusion(preds, labels, n_classes):
    """``cm[i, j]`` counts rows of true class ``i`` predicted as ``j``."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions, {labels.size} labels")
    for name, v in (("prediction", preds), ("label", labels)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"{name} outside 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def _ratio(num, den, flags, what):
    if den == 0:
        flags.append(f"{what} is 0/0, reported as 0")
        return 0.0
    return num / den


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    sensitivity: tuple[float, ...]
    specificity: tuple[float, ...]
    precision: tuple[float, ...]
    f1: tuple[float, ...]
    g_mean: float
    flags: tuple[str, ...] = ()

    def to_dict(self, label_names=None):
        n = len(self.sensitivity)
        names = list(label_names) if label_names is not None else [str(c) for c in range(n)]
        return {
            "accuracy": self.accuracy,
            "g_mean": self.g_mean,
            "per_class": {
                names[c]: {
                    "sensitivity": self.sensitivity[c],
                    "specificity": self.specificity[c],
                    "precision": self.precision[c],
                    "f1": self.f1[c],
                }
                for c in range(n)
            },
            "flags": list(self.flags),
        }


def class_metrics(cm):
    """One-vs-rest sensitivity, specificity, precision and F1 per class.

    G-mean is the geometric mean of the per-class sensitivities.  Any 0/0
    ratio is reported as 0 and recorded in ``flags``.  Every ratio is formed
    from integer counts with a single rounding, so values equal the exact
    fractions rounded to the nearest double (G-mean: one more rounding for
    the root).
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    C = cm.shape[0]
    flags = []
    sens, spec, prec, f1 = [], [], [], []
    tp_prod, pos_prod = 1, 1
    for c in range(C):
        tp = int(cm[c, c])
        fn = int(cm[c].sum()) - tp
        fp = int(cm[:, c].sum()) - tp
        tn = total - tp - fn - fp
        s = _ratio(tp, tp + fn, flags, f"sensitivity of class {c}")
        sp = _ratio(tn, tn + fp, flags, f"specificity of class {c}")
        p = _ratio(tp, tp + fp, flags, f"precision of class {c}")
        # 2ps/(p+s) == 2tp/(2tp+fp+fn), and p + s == 0 exactly when tp == 0
        if tp:
            f = 2 * tp / (2 * tp + fp + fn)
        else:
            f = _ratio(0, 0, flags, f"F1 of class {c}")
        sens.append(s)
        spec.append(sp)
        prec.append(p)
        f1.append(f)
        tp_prod *= tp
        pos_prod *= tp + fn
    if pos_prod == 0:
        g = 0.0  # some class has no rows; its sensitivity was already flagged
    elif C == 2:
        g = math.sqrt(tp_prod / pos_prod)
    else:
        g = (tp_prod / pos_prod) ** (1.0 / C)
    return ClassMetrics(
        float(np.trace(cm)) / total, tuple(sens), tuple(spec), tuple(prec), tuple(f1), g, tuple(flags)
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray   # score at each point; +inf for the (0, 0) origin
    fp_counts: np.ndarray
    tp_counts: np.ndarray
    positive_class: int

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels, positive_class=1):
    """ROC points for a descending threshold sweep, one point per distinct score."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == positive_class
    n_pos = int(pos.sum())
    n_neg = int(pos.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both positive and negative rows")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = pos[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp_c = np.r_[0, tp[last]].astype(np.int64)
    fp_c = np.r_[0, fp[last]].astype(np.int64)
    return RocCurve(
        fp_c / n_neg, tp_c / n_pos, np.r_[np.inf, s[last]], fp_c, tp_c, positive_class
    )


def auc(curve):
    """Trapezoidal area under the ROC curve."""
    fp = curve.fp_counts
    tp = curve.tp_counts
    n_neg, n_pos = fp[-1], tp[-1]
    # integer-exact trapezoid sum; ties between scores form diagonal segments
    area2 = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return area2 / (2.0 * n_pos * n_neg)
