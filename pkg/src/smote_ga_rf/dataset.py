"""Tabular dataset container, CSV/schema I/O, preprocessing and a synthetic generator.

Missing cells are stored as NaN in ``x`` and flagged in ``missing``.  Category
codes are kept as plain floats so every downstream stage sees one numeric
matrix.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import substream

KINDS = ("binary", "categorical", "continuous")


class InputError(ValueError):
    """Malformed user input (files, schemas, configs).  Maps to exit code 2."""


class DataError(InputError):
    """A CSV cell or column that violates the schema."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    cardinality: int | None = None
    declared_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "binary":
            if self.cardinality not in (None, 2):
                raise InputError(f"feature {self.name!r}: binary features have cardinality 2")
            object.__setattr__(self, "cardinality", 2)
        elif self.kind == "categorical":
            if self.cardinality is None or int(self.cardinality) < 2:
                raise InputError(f"feature {self.name!r}: categorical cardinality must be >= 2")
            object.__setattr__(self, "cardinality", int(self.cardinality))
        elif self.cardinality is not None:
            raise InputError(f"feature {self.name!r}: continuous features take no cardinality")
        if self.declared_range is not None:
            lo, hi = (float(v) for v in self.declared_range)
            if not lo < hi:
                raise InputError(f"feature {self.name!r}: range needs lo < hi, got {lo}, {hi}")
            object.__setattr__(self, "declared_range", (lo, hi))

    @property
    def is_categorical(self):
        return self.kind != "continuous"

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["cardinality"] = self.cardinality
        if self.declared_range is not None:
            d["range"] = list(self.declared_range)
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            rng = d.get("range")
            return cls(
                name=str(d["name"]),
                kind=str(d["kind"]),
                cardinality=d.get("cardinality"),
                declared_range=tuple(rng) if rng is not None else None,
            )
        except KeyError as e:
            raise InputError(f"schema entry missing field {e.args[0]!r}: {d}") from None


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix, integer labels ``0..C-1`` and per-feature metadata.

    Instances are immutable: arrays are stored read-only and every operation
    returns a new ``Dataset``.
    """

    x: np.ndarray
    y: np.ndarray
    specs: tuple[FeatureSpec, ...]
    missing: np.ndarray | None = None
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64, copy=True)
        if x.ndim == 1 and x.size == 0:
            x = x.reshape(0, len(self.specs))
        if x.ndim != 2:
            raise ValueError("x must be two-dimensional")
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        specs = tuple(self.specs)
        if x.shape[1] != len(specs):
            raise ValueError(f"x has {x.shape[1]} columns but {len(specs)} feature specs")
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"y has {y.shape[0]} labels for {x.shape[0]} rows")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.missing is None:
            missing = np.isnan(x)
        else:
            missing = np.array(self.missing, dtype=bool, copy=True)
            if missing.shape != x.shape:
                raise ValueError("missing mask shape differs from x")
            x[missing] = np.nan
        if not np.all(np.isfinite(x[~missing])):
            raise ValueError("non-finite value outside the missing mask")
        n_classes = int(y.max()) + 1 if y.size else 0
        if y.size and y.min() < 0:
            raise ValueError("labels must be non-negative")
        label_names = tuple(str(v) for v in self.label_names) or tuple(str(i) for i in range(n_classes))
        if len(label_names) < n_classes:
            raise ValueError("fewer label names than classes")
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "missing", _readonly(missing))
        object.__setattr__(self, "label_names", label_names)

    @property
    def n_rows(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def n_classes(self):
        return len(self.label_names)

    @property
    def feature_names(self):
        return [s.name for s in self.specs]

    def class_counts(self):
        return np.bincount(self.y, minlength=self.n_classes)

    def has_missing(self):
        return bool(self.missing.any())

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.x[rows], self.y[rows], self.specs, self.missing[rows], self.label_names)

    def select(self, columns):
        """Restrict to feature columns (indices or a boolean mask)."""
        columns = np.asarray(columns)
        if columns.dtype == bool:
            columns = np.flatnonzero(columns)
        specs = tuple(self.specs[j] for j in columns)
        return Dataset(self.x[:, columns], self.y, specs, self.missing[:, columns], self.label_names)

    def replace(self, x=None, y=None, missing=None):
        return Dataset(
            self.x if x is None else x,
            self.y if y is None else y,
            self.specs,
            (self.missing if x is None else None) if missing is None else missing,
            self.label_names,
        )


# -- schema / CSV ----------------------------------------------------------------


def load_schema(path):
    """Read a schema JSON file; returns ``(specs, label_column)``.

    Layout::

        {"label_column": "diagnosis",
         "features": [{"name": "Age", "kind": "continuous", "range": [2, 54]},
                      {"name": "Format", "kind": "categorical", "cardinality": 3},
                      {"name": "Gender", "kind": "binary"}]}
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"schema file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"schema {path} is not valid JSON: {e}") from None
    return schema_from_dict(doc)


def schema_from_dict(doc):
    if not isinstance(doc, dict) or "features" not in doc or "label_column" not in doc:
        raise InputError("schema needs 'features' and 'label_column'")
    specs = [FeatureSpec.from_dict(d) for d in doc["features"]]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InputError("schema feature names must be unique")
    label = str(doc["label_column"])
    if label in names:
        raise InputError(f"label column {label!r} also listed as a feature")
    return specs, label


def schema_to_dict(specs, label_column):
    return {"label_column": label_column, "features": [s.to_dict() for s in specs]}


def save_schema(path, specs, label_column):
    Path(path).write_text(json.dumps(schema_to_dict(specs, label_column), indent=2) + "\n", encoding="utf-8")


def load_csv(path, schema, label_column):
    """Load a CSV whose header is the schema's feature names plus ``label_column``.

    Empty cells are missing.  Labels are mapped to ``0..C-1`` in order of first
    appearance; the original label strings are kept in ``label_names``.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"data file not found: {path}")
    specs = list(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("file is empty (no header row)") from None
        expected = {s.name for s in specs} | {label_column}
        for h in header:
            if h not in expected:
                raise DataError("unknown column", row=1, column=h)
        for name in expected:
            if name not in header:
                raise DataError("column missing from header", row=1, column=name)
        if len(header) != len(set(header)):
            raise DataError("duplicate column in header", row=1)
        col_of = {h: i for i, h in enumerate(header)}
        label_idx = col_of[label_column]

        rows, labels, label_ids = [], [], {}
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(f"expected {len(header)} cells, found {len(record)}", row=lineno)
            raw_label = record[label_idx].strip()
            if not raw_label:
                raise DataError("label cell is missing", row=lineno, column=label_column)
            labels.append(label_ids.setdefault(raw_label, len(label_ids)))
            values = []
            for spec in specs:
                cell = record[col_of[spec.name]].strip()
                values.append(_parse_cell(cell, spec, lineno))
            rows.append(values)

    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(specs))
    return Dataset(x, np.array(labels, dtype=np.int64), tuple(specs), None, tuple(label_ids))


def _parse_cell(cell, spec, lineno):
    if cell == "":
        return math.nan
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell {cell!r}", row=lineno, column=spec.name) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite cell {cell!r}", row=lineno, column=spec.name)
    if spec.is_categorical and v != int(v):
        raise DataError(f"category code must be an integer, got {cell!r}", row=lineno, column=spec.name)
    return v


def _format_cell(v, spec):
    if math.isnan(v):
        return ""
    if spec.is_categorical and v == int(v):
        return str(int(v))
    return repr(float(v))


def write_csv(path, ds, label_column):
    """Write ``ds`` in the layout ``load_csv`` reads; floats are written with repr so values round-trip exactly.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, ds, label_column)
        return
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, ds, label_column)


def _write_rows(fh, ds, label_column):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ds.feature_names + [label_column])
    for i in range(ds.n_rows):
        cells = [_format_cell(ds.x[i, j], s) for j, s in enumerate(ds.specs)]
        w.writerow(cells + [ds.label_names[ds.y[i]]])


# -- imputation ------------------------------------------------------------------


def fit_impute(ds):
    """Per-column fill values: mean for continuous, mode (smallest code on ties) otherwise."""
    fill = np.empty(ds.n_features)
    for j, spec in enumerate(ds.specs):
        observed = ds.x[~ds.missing[:, j], j]
        if observed.size == 0:
            raise ValueError(
                f"column {spec.name!r} has no observed values; run drop_degenerate before impute"
            )
        if spec.is_categorical:
            values, counts = np.unique(observed, return_counts=True)
            fill[j] = values[np.argmax(counts)]
        else:
            fill[j] = observed.mean()
    return fill


def apply_impute(ds, fill):
    x = np.where(ds.missing, np.asarray(fill)[None, :], ds.x)
    return ds.replace(x=x, missing=np.zeros_like(ds.missing))


def impute(ds):
    return apply_impute(ds, fit_impute(ds))


# -- scaling ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleParams:
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def degenerate(self):
        return self.maxs == self.mins


def fit_scale(ds):
    if ds.has_missing():
        raise ValueError("fit_scale needs imputed data")
    if ds.n_rows == 0:
        raise ValueError("cannot fit scaling on an empty dataset")
    return ScaleParams(ds.x.min(axis=0), ds.x.max(axis=0))


def apply_scale(ds, params):
    """Min-max rescale with train-fitted params.

    Degenerate columns map to 0.0.  Values from other data may fall outside
    [0, 1]; they are not clipped.
    """
    if ds.has_missing():
        raise ValueError("apply_scale needs imputed data")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    x = (ds.x - params.mins) / safe
    x[:, span <= 0] = 0.0
    return ds.replace(x=x)


# -- degenerate columns -----------------------------------------------------------


def degenerate_columns(ds):
    """Boolean mask of columns that are fully missing or constant over observed values."""
    out = np.zeros(ds.n_features, dtype=bool)
    for j in range(ds.n_features):
        observed = ds.x[~ds.missing[:, j], j]
        out[j] = observed.size == 0 or observed.min() == observed.max()
    return out


def drop_degenerate(ds):
    bad = degenerate_columns(ds)
    dropped = [s.name for s, b in zip(ds.specs, bad) if b]
    return ds.select(~bad), dropped


# -- synthetic generator ------------------------------------------------------------

ROLES = ("informative", "noise", "constant", "missing")


@dataclass
class GeneratorFeature:
    spec: FeatureSpec
    role: str = "noise"
    separation: float = 0.0
    first_code: int = 0
    value: float | None = None


@dataclass
class GeneratorConfig:
    class_names: list[str]
    class_counts: list[int]
    features: list[GeneratorFeature]
    label_column: str = "label"
    missing_rate: float = 0.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def specs(self):
        return [f.spec for f in self.features]


def generator_config_from_dict(doc):
    """Build a :class:`GeneratorConfig` from its JSON form.

    ``classes`` lists ``{"name", "count"}`` entries.  Features come either one
    by one under ``features`` (schema fields plus ``role``, ``separation``,
    ``first_code``, ``value``) or in bulk under ``blocks``
    (``{"kind", "count", "role", "separation", "prefix", ...}``); blocks are
    appended after the explicit features.
    """
    if not isinstance(doc, dict):
        raise InputError("generator config must be a JSON object")
    classes = doc.get("classes")
    if not classes or len(classes) < 2:
        raise InputError("generator config needs at least two classes")
    names = [str(c["name"]) for c in classes]
    counts = [int(c["count"]) for c in classes]
    if any(c < 0 for c in counts):
        raise InputError(f"class counts must be non-negative, got {counts}")
    if sum(counts) == 0:
        raise InputError("generator config produces zero rows")

    feats = []
    for d in doc.get("features", []):
        feats.append(_generator_feature(d, d["name"]))
    for b in doc.get("blocks", []):
        count = int(b.get("count", 0))
        if count < 0:
            raise InputError(f"block count must be non-negative, got {count}")
        prefix = b.get("prefix", f"{b.get('role', 'noise')}_{b['kind']}")
        for i in range(count):
            feats.append(_generator_feature(b, f"{prefix}_{i}"))
    if not feats:
        raise InputError("generator config defines no features")
    rate = float(doc.get("missing_rate", 0.0))
    if not 0.0 <= rate < 1.0:
        raise InputError(f"missing_rate must be in [0, 1), got {rate}")
    known = {"classes", "features", "blocks", "missing_rate", "seed", "label_column"}
    return GeneratorConfig(
        class_names=names,
        class_counts=counts,
        features=feats,
        label_column=str(doc.get("label_column", "label")),
        missing_rate=rate,
        seed=int(doc.get("seed", 0)),
        extra={k: v for k, v in doc.items() if k not in known},
    )


def _generator_feature(d, name):
    role = d.get("role", "noise")
    if role not in ROLES:
        raise InputError(f"feature {name!r}: unknown role {role!r}")
    spec = FeatureSpec.from_dict({**d, "name": name})
    sep = float(d.get("separation", 0.0))
    if sep < 0:
        raise InputError(f"feature {name!r}: separation must be non-negative")
    return GeneratorFeature(spec, role, sep, int(d.get("first_code", 0)), d.get("value"))


def generate_synthetic(cfg, seed=None):
    """Draw a labelled dataset from class-conditional distributions.

    Continuous features are Gaussian with unit spread in "separation units";
    informative ones shift the class means apart by ``separation`` spreads
    between neighbouring classes.  A declared range maps +-3 spreads onto the
    range and clips.  Categorical features are multinomial with class-dependent
    tilts.  Rows come out grouped by class, in config order.
    """
    if isinstance(cfg, dict):
        cfg = generator_config_from_dict(cfg)
    seed = cfg.seed if seed is None else int(seed)
    counts = np.asarray(cfg.class_counts, dtype=np.int64)
    if (counts < 0).any():
        raise InputError("class counts must be non-negative")
    n = int(counts.sum())
    n_classes = len(counts)
    y = np.repeat(np.arange(n_classes), counts)
    centred = np.arange(n_classes) - (n_classes - 1) / 2.0

    x = np.empty((n, len(cfg.features)))
    missing = np.zeros_like(x, dtype=bool)
    for j, feat in enumerate(cfg.features):
        rng = substream(seed, "feature", j)
        spec = feat.spec
        if feat.role == "missing":
            missing[:, j] = True
            x[:, j] = np.nan
            continue
        if feat.role == "constant":
            if feat.value is not None:
                v = float(feat.value)
            elif spec.is_categorical:
                v = float(feat.first_code)
            else:
                v = spec.declared_range[0] if spec.declared_range else 0.0
            x[:, j] = v
            continue
        sep = feat.separation if feat.role == "informative" else 0.0
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if spec.is_categorical:
            k = spec.cardinality
            tilt = np.linspace(-1.0, 1.0, k)
            codes = np.empty(n, dtype=np.int64)
            for c in range(n_classes):
                rows = y == c
                logits = sign * sep * centred[c] * tilt
                p = np.exp(logits - logits.max())
                codes[rows] = rng.choice(k, size=int(rows.sum()), p=p / p.sum())
            x[:, j] = codes + feat.first_code
        else:
            z = rng.standard_normal(n) + sign * sep * centred[y]
            if spec.declared_range is not None:
                lo, hi = spec.declared_range
                mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
                z = np.clip(mid + half * z / 3.0, lo, hi)
            x[:, j] = z
        if cfg.missing_rate > 0:
            m = rng.random(n) < cfg.missing_rate
            if m.all():
                m[0] = False
            missing[:, j] = m
    x[missing] = np.nan
    return Dataset(x, y, tuple(cfg.specs), missing, tuple(cfg.class_names))


# 29 clinical, histological and immunohistochemical attributes.
# P16 is constant and ALK Fish is empty, leaving 27 usable columns.
_PAPER_BINARY_HISTOLOGY = [
    "Cytonuclear Atypia", "deep mitosis", "Atypical Mitosis", "Infiltration of the hypodermis",
    "Asymmetry", "Blurred boundaries", "Pagetoid spread", "Density of lymphocytic infiltrate",
    "Hypercellularity", "Ulceration", "Kamino's body", "desmoplastic cells",
    "epidermal alteration", "grenz zone infiltration", "irregular nests", "lack of maturation",
]


# Signal sits in ten of the binary histology columns; the remaining usable
# columns, continuous ones included, are noise.
PAPER_INFORMATIVE = tuple(_PAPER_BINARY_HISTOLOGY[:10])


def paper_shaped_config(majority=47, minority=7, separation=1.0, missing_rate=0.05, seed=2019,
                        informative=PAPER_INFORMATIVE):
    """Generator config for a 54-row, 29-attribute lesion dataset.

    Columns named in ``informative`` carry class signal at ``separation``; the
    other usable columns are noise.
    """
    informative = set(informative)

    def feat(name, kind, **kw):
        role = kw.pop("role", "informative" if name in informative else "noise")
        d = {"name": name, "kind": kind, "role": role, **kw}
        if role == "informative":
            d.setdefault("separation", separation)
        return d

    features = [
        feat("Gender", "binary"),
        feat("Localization", "categorical", cardinality=5, first_code=1),
        feat("Age", "continuous", range=[2, 54]),
        feat("Format", "categorical", cardinality=3, first_code=1),
        feat("Size of spitz", "continuous", range=[0.3, 1.4]),
        feat("Thickness", "continuous", range=[0.1, 6]),
        feat("Mitotic index", "continuous", range=[0, 2.2]),
    ]
    features += [feat(name, "binary") for name in _PAPER_BINARY_HISTOLOGY]
    features += [
        feat("P16", "binary", role="constant", value=1),
        feat("KI 67", "continuous", range=[0, 18]),
        feat("BRAF", "binary"),
        feat("ALK IH", "binary"),
        feat("ALK Fish", "binary", role="missing"),
        feat("Melanin pigmentation", "categorical", cardinality=4),
    ]
    return {
        "classes": [{"name": "SN", "count": majority}, {"name": "AST", "count": minority}],
        "label_column": "diagnosis",
        "features": features,
        "missing_rate": missing_rate,
        "seed": seed,
    }
