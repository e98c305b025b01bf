"""SMOTE: synthetic minority rows interpolated between minority neighbours."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import substream


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 6
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.k_neighbors) < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < float(self.target_ratio) <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")


@dataclass(frozen=True)
class NeighborTable:
    rows: np.ndarray        # minority row indices into the dataset
    neighbors: np.ndarray   # (n_minority, k) dataset row indices, nearest first
    k: int
    warnings: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class SmoteResult:
    dataset: object
    provenance: np.ndarray  # structured: base_index, neighbor_index, gap
    n_original: int
    minority_label: int
    warnings: tuple[str, ...] = ()

    @property
    def synthetic_rows(self):
        return np.arange(self.n_original, self.dataset.n_rows)


PROVENANCE_DTYPE = np.dtype([("base_index", np.int64), ("neighbor_index", np.int64), ("gap", np.float64)])


def minority_label(y):
    counts = np.bincount(y)
    present = np.flatnonzero(counts)
    return int(present[np.argmin(counts[present])])


def minority_neighbors(ds, k, label=None):
    """k nearest minority rows (Euclidean) for every minority row, self excluded.

    Distance ties go to the lower row index.  ``k`` above ``n_minority - 1`` is
    capped, and the cap is reported in ``warnings``.
    """
    if ds.has_missing():
        raise ValueError("neighbour search needs imputed data")
    label = minority_label(ds.y) if label is None else int(label)
    rows = np.flatnonzero(ds.y == label)
    m = rows.size
    if m < 2:
        raise ValueError(f"minority class has {m} sample(s); SMOTE needs at least 2")
    warnings = []
    if k > m - 1:
        warnings.append(f"k_neighbors={k} capped to {m - 1} (minority class has {m} rows)")
        k = m - 1
    pts = ds.x[rows]
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps lower row index first among equal distances
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return NeighborTable(rows, rows[order], k, tuple(warnings))


def oversample(ds, cfg=None, fixed_gap=None):
    """Append synthetic minority rows until minority/majority reaches ``target_ratio``.

    Base rows are taken round-robin over the minority rows; each synthetic row
    picks one of its base's k neighbours uniformly and a single gap ``u`` in
    [0, 1] shared by all features.  ``fixed_gap`` pins ``u`` (test hook).
    """
    cfg = cfg or SmoteConfig()
    counts = ds.class_counts()
    present = np.flatnonzero(counts)
    if present.size != 2 or ds.n_classes != 2:
        raise ValueError(f"SMOTE here handles exactly two classes, found {present.size}")
    lab = minority_label(ds.y)
    maj = int(counts.max())
    mino = int(counts[lab])
    target = math.ceil(cfg.target_ratio * maj)
    n_new = target - mino
    empty = np.zeros(0, dtype=PROVENANCE_DTYPE)
    if n_new <= 0 or mino == maj:
        return SmoteResult(ds, empty, ds.n_rows, lab)

    table = minority_neighbors(ds, int(cfg.k_neighbors), lab)
    rng = substream(cfg.seed, "smote")
    pick = rng.integers(0, table.k, size=n_new)
    gaps = rng.random(n_new) if fixed_gap is None else np.full(n_new, float(fixed_gap))
    slot = np.arange(n_new) % table.rows.size
    base = table.rows[slot]
    nbr = table.neighbors[slot, pick]
    xb = ds.x[base]
    synth = xb + gaps[:, None] * (ds.x[nbr] - xb)

    x = np.vstack([ds.x, synth])
    y = np.concatenate([ds.y, np.full(n_new, lab, dtype=np.int64)])
    prov = np.empty(n_new, dtype=PROVENANCE_DTYPE)
    prov["base_index"] = base
    prov["neighbor_index"] = nbr
    prov["gap"] = gaps
    out = ds.replace(x=x, y=y, missing=np.zeros(x.shape, dtype=bool))
    return SmoteResult(out, prov, ds.n_rows, lab, table.warnings)


def write_provenance(path, result):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["synthetic_index", "base_index", "neighbor_index", "gap"])
        for i, rec in enumerate(result.provenance):
            w.writerow([result.n_original + i, int(rec["base_index"]), int(rec["neighbor_index"]), repr(float(rec["gap"]))])
