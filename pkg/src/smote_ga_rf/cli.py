"""Command-line front end: ``smote-ga-rf <command> [options]``.

Commands mirror the pipeline stages::

    synth       draw a synthetic dataset (data.csv + schema.json)
    preprocess  drop degenerate columns, impute and rescale to [0, 1]
    smote       oversample the minority class
    select      GA feature selection
    train       fit a forest and save it as JSON
    predict     score a CSV with a saved forest
    pipeline    cross-validate one or more modes and write reports

Every command writes ``manifest.json`` next to its outputs.  Outputs are only
written once the whole computation has succeeded.  Exit codes: 0 success,
1 computation error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _accel
from . import dataset as dsmod
from .dataset import InputError
from .evaluation import MODES, PipelineConfig, Preprocessor, fit_preprocess, run_pipeline
from .forest import fit, forest_from_dict, forest_to_dict
from .gafs import FitnessEvaluator, run_ga
from .rng import derive_seed
from .smote import SmoteConfig, minority_label, oversample

SCOPE_CHOICES = ("per_fold", "global", "both")


# -- small helpers -----------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(doc):
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_json(path, what):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"{what} {path} is not valid JSON: {e}") from None


class Outputs:
    """Files staged in memory and written together at the end of a command."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files = {}

    def text(self, name, content):
        self.files[name] = content

    def json(self, name, doc):
        self.files[name] = dumps(doc)

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.files[name] = buf.getvalue()

    def write(self, manifest):
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, content in self.files.items():
            (self.dir / name).write_text(content, encoding="utf-8")
        manifest["outputs"] = {
            name: hashlib.sha256(content.encode("utf-8")).hexdigest() for name, content in self.files.items()
        }
        (self.dir / "manifest.json").write_text(dumps(manifest), encoding="utf-8")


def _manifest(args, config, inputs, started):
    return {
        "tool": "smote-ga-rf",
        "tool_version": __version__,
        "command": args.command,
        "argv": list(args.argv),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
        "backend": _accel.get_backend(),
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "started": started,
        "finished": _now(),
    }


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _load_data(args):
    if not args.schema:
        raise InputError("--schema is required")
    if not args.data:
        raise InputError("--data is required")
    specs, label = dsmod.load_schema(args.schema)
    ds = dsmod.load_csv(args.data, specs, label)
    if ds.n_rows == 0:
        raise InputError(f"{args.data} holds no data rows")
    return ds, specs, label


def _preprocess_doc(pre, ds):
    return {
        "input_features": ds.feature_names,
        "dropped": list(pre.dropped),
        "kept": [n for n, k in zip(ds.feature_names, pre.keep) if k],
        "fill": pre.fill.tolist(),
        "min": pre.scale.mins.tolist(),
        "max": pre.scale.maxs.tolist(),
    }


def _as_continuous(specs):
    """Scaled or interpolated columns no longer hold integer codes."""
    return [dsmod.FeatureSpec(s.name, "continuous") for s in specs]


def _preprocessor_from_doc(doc):
    keep_names = set(doc["kept"])
    keep = np.array([n in keep_names for n in doc["input_features"]])
    scale = dsmod.ScaleParams(np.array(doc["min"], dtype=float), np.array(doc["max"], dtype=float))
    return Preprocessor(keep, tuple(doc["dropped"]), np.array(doc["fill"], dtype=float), scale)


# -- configuration -----------------------------------------------------------------


def _pipeline_config(args):
    """Config file contents with command-line overrides applied."""
    doc = _read_json(args.config, "config") if getattr(args, "config", None) else {}
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    doc = dict(doc)
    modes = doc.pop("modes", None)
    scope = doc.get("smote_scope", "per_fold")
    if getattr(args, "mode", None):
        modes = [m.strip() for m in args.mode.split(",") if m.strip()]
    if modes is None:
        modes = [doc.get("mode", "smote_ga_rf")] if "mode" in doc else list(MODES)
    for m in modes:
        if m not in MODES:
            raise InputError(f"unknown mode {m!r}; choose from {', '.join(MODES)}")
    if getattr(args, "smote_scope", None):
        scope = args.smote_scope
    if scope not in SCOPE_CHOICES:
        raise InputError(f"smote_scope must be one of {SCOPE_CHOICES}, got {scope!r}")
    doc.pop("smote_scope", None)
    doc.pop("mode", None)
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "folds", None) is not None:
        doc["cv_folds"] = args.folds
    if getattr(args, "smote_k", None) is not None:
        doc["smote"] = {**doc.get("smote", {}), "k_neighbors": args.smote_k}
    try:
        base = PipelineConfig.from_dict(doc)
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid config: {e}") from None
    scopes = ["per_fold", "global"] if scope == "both" else [scope]
    return base, modes, scopes


# -- commands ----------------------------------------------------------------------


def cmd_synth(args):
    started = _now()
    if args.preset and args.config:
        raise InputError("use either --preset or --config, not both")
    if args.preset == "paper":
        doc = dsmod.paper_shaped_config()
    elif args.config:
        doc = _read_json(args.config, "generator config")
    else:
        raise InputError("synth needs --config or --preset")
    cfg = dsmod.generator_config_from_dict(doc)
    seed = cfg.seed if args.seed is None else args.seed
    ds = dsmod.generate_synthetic(cfg, seed)

    out = Outputs(args.out)
    buf = io.StringIO()
    dsmod.write_csv(buf, ds, cfg.label_column)
    out.text("data.csv", buf.getvalue())
    out.json("schema.json", dsmod.schema_to_dict(cfg.specs, cfg.label_column))
    inputs = [args.config] if args.config else []
    out.write(_manifest(args, {"generator": doc, "seed": seed}, inputs, started))
    print(f"wrote {ds.n_rows} rows x {ds.n_features} features to {args.out}")
    return 0


def cmd_preprocess(args):
    started = _now()
    ds, _, label = _load_data(args)
    pre = fit_preprocess(ds)
    clean = pre.apply(ds)
    out = Outputs(args.out)
    buf = io.StringIO()
    dsmod.write_csv(buf, clean, label)
    out.text("data.csv", buf.getvalue())
    out.json("schema.json", dsmod.schema_to_dict(_as_continuous(clean.specs), label))
    out.json("preprocess.json", _preprocess_doc(pre, ds))
    out.write(_manifest(args, {}, [args.data, args.schema], started))
    if pre.dropped:
        print(f"dropped degenerate features: {', '.join(pre.dropped)}")
    return 0


def cmd_smote(args):
    started = _now()
    ds, _, label = _load_data(args)
    if ds.has_missing():
        raise InputError("data has missing cells; run 'preprocess' first")
    cfg = SmoteConfig(k_neighbors=args.smote_k or 6, target_ratio=args.ratio, seed=args.seed or 0)
    res = oversample(ds, cfg)
    out = Outputs(args.out)
    buf = io.StringIO()
    dsmod.write_csv(buf, res.dataset, label)
    out.text("data.csv", buf.getvalue())
    out.json("schema.json", dsmod.schema_to_dict(_as_continuous(ds.specs), label))
    out.csv(
        "provenance.csv", ["synthetic_index", "base_index", "neighbor_index", "gap"],
        [[res.n_original + i, int(r["base_index"]), int(r["neighbor_index"]), repr(float(r["gap"]))]
         for i, r in enumerate(res.provenance)],
    )
    man = _manifest(args, {"smote": {"k_neighbors": cfg.k_neighbors, "target_ratio": cfg.target_ratio,
                                     "seed": cfg.seed}}, [args.data, args.schema], started)
    man["warnings"] = list(res.warnings)
    out.write(man)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"added {len(res.provenance)} synthetic rows")
    return 0


def cmd_select(args):
    started = _now()
    ds, _, _ = _load_data(args)
    base, _, _ = _pipeline_config(args)
    pre = fit_preprocess(ds)
    work = pre.apply(ds)
    spec = replace(base.fitness, fitness_seed=derive_seed(base.seed, "fitness"))
    ga_cfg = replace(base.ga, seed=derive_seed(base.seed, "ga"))
    evaluator = FitnessEvaluator(work, spec, threads=args.threads)
    result = run_ga(work, ga_cfg, fitness=evaluator)
    names = result.selected_names(work.feature_names)

    out = Outputs(args.out)
    out.json("selected_features.json", names)
    out.json("selection.json", {
        "selected_features": names,
        "best_fitness": result.best_fitness,
        "n_features": work.n_features,
        "dropped": list(pre.dropped),
        "n_evaluations": result.n_evaluations,
    })
    out.csv("ga_history.csv", *_history_rows(result.history))
    out.write(_manifest(args, base.to_dict(), [args.data, args.schema] + _opt(args.config), started))
    print(f"selected {len(names)} of {work.n_features} features (fitness {result.best_fitness:.4f})")
    return 0


def _history_rows(history):
    rows = [[g, repr(b), repr(m), int(mask.sum())]
            for g, (b, m, mask) in enumerate(zip(history.best_fitness, history.mean_fitness, history.best_masks))]
    return ["generation", "best", "mean", "n_selected"], rows


def _opt(path):
    return [path] if path else []


def cmd_train(args):
    started = _now()
    ds, _, label = _load_data(args)
    base, modes, _ = _pipeline_config(args)
    mask_names = None
    if args.mask:
        mask_names = _read_json(args.mask, "mask")
        if not isinstance(mask_names, list) or not mask_names:
            raise InputError("mask file must hold a non-empty JSON array of feature names")
        unknown = [n for n in mask_names if n not in ds.feature_names]
        if unknown:
            raise InputError(f"mask names unknown features: {unknown}")
    use_smote = bool(args.smote)

    pre = fit_preprocess(ds)
    work = pre.apply(ds)
    if mask_names is not None:
        keep = [n for n in work.feature_names if n in set(mask_names)]
        if len(keep) != len(mask_names):
            dropped = sorted(set(mask_names) - set(keep))
            raise InputError(f"masked features {dropped} are degenerate in the training data")
        work = work.select(np.array([n in set(keep) for n in work.feature_names]))
    positive = minority_label(work.y)
    if use_smote:
        work = oversample(work, replace(base.smote, seed=derive_seed(base.seed, "smote"))).dataset
    rf = fit(work, replace(base.forest, seed=derive_seed(base.seed, "forest")), threads=args.threads)

    train_acc = float((rf.predict(work.x) == work.y).mean())
    model = {
        "format": "smote-ga-rf/model",
        "version": 1,
        "label_column": label,
        "positive_label": ds.label_names[positive],
        "preprocess": _preprocess_doc(pre, ds),
        "selected_features": list(work.feature_names),
        "smote": use_smote,
        "forest": forest_to_dict(rf),
    }
    out = Outputs(args.out)
    out.json("model.json", model)
    out.write(_manifest(args, base.to_dict(), [args.data, args.schema] + _opt(args.config) + _opt(args.mask),
                        started))
    print(f"trained {rf.n_trees} trees on {work.n_rows} rows x {work.n_features} features "
          f"(training accuracy {train_acc:.4f})")
    return 0


def _load_model(path):
    doc = _read_json(path, "model")
    if not isinstance(doc, dict) or doc.get("format") != "smote-ga-rf/model":
        raise InputError(f"{path} is not a smote-ga-rf model")
    if doc.get("version") != 1:
        raise InputError(f"unsupported model version {doc.get('version')!r}")
    try:
        rf = forest_from_dict(doc["forest"])
        pre = _preprocessor_from_doc(doc["preprocess"])
        return doc, rf, pre
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"corrupt model {path}: {e}") from None


def cmd_predict(args):
    started = _now()
    doc, rf, pre = _load_model(args.model)
    ds, _, _ = _load_data(args)
    expected = doc["preprocess"]["input_features"]
    if ds.feature_names != expected:
        raise InputError(
            f"schema mismatch: model expects {len(expected)} features {expected}, "
            f"data has {ds.n_features} features {ds.feature_names}"
        )
    work = pre.apply(ds)
    sel = doc["selected_features"]
    work = work.select(np.array([n in set(sel) for n in work.feature_names]))
    proba = rf.predict_proba(work.x)
    pred = np.argmax(proba, axis=1)
    labels = list(rf.label_names)
    pos = labels.index(doc["positive_label"])

    rows = []
    truth = [ds.label_names[v] for v in ds.y]
    for i in range(ds.n_rows):
        rows.append([i, labels[pred[i]], repr(float(proba[i, pos])), truth[i]])
    out = Outputs(args.out)
    out.csv("predictions.csv", ["row", "label", f"score_{doc['positive_label']}", "true_label"], rows)
    man = _manifest(args, {}, [args.model, args.data, args.schema], started)
    correct = sum(labels[p] == t for p, t in zip(pred, truth))
    man["accuracy"] = correct / ds.n_rows
    out.write(man)
    print(f"scored {ds.n_rows} rows (accuracy against the label column {correct / ds.n_rows:.4f})")
    return 0


def cmd_pipeline(args):
    started = _now()
    ds, _, _ = _load_data(args)
    base, modes, scopes = _pipeline_config(args)

    out = Outputs(args.out)
    table = []
    for mode in modes:
        for scope in scopes:
            if mode == "rf_only" and scope != scopes[0]:
                continue  # scope only matters once SMOTE is involved
            cfg = replace(base, mode=mode, smote_scope=scope)
            rep = run_pipeline(ds, cfg, threads=args.threads)
            tag = mode if len(scopes) == 1 or mode == "rf_only" else f"{mode}_{scope}"
            doc = rep.to_dict()
            out.json(f"report_{tag}.json", doc)
            out.csv(f"roc_{tag}.csv", ["fpr", "tpr"],
                    [[repr(float(a)), repr(float(b))] for a, b in zip(rep.roc_fpr, rep.roc_tpr)])
            out.csv(f"predictions_{tag}.csv", ["row", "label", "score", "true_label"],
                    [[i, rep.label_names[p], repr(float(s)), rep.label_names[t]]
                     for i, (p, s, t) in enumerate(zip(rep.predictions, rep.scores, rep.labels))])
            if rep.selected_features is not None:
                out.json(f"selected_features_{tag}.json", rep.selected_features)
                for f, hist in enumerate(rep.ga_histories):
                    out.csv(f"ga_history_{tag}_fold{f}.csv", *_history_rows(hist))
            table.append(rep)
            for w in rep.warnings:
                print(f"warning [{tag}]: {w}", file=sys.stderr)
            print(f"{tag}: accuracy {rep.accuracy:.4f}  g-mean {rep.g_mean:.4f}  auc {rep.auc:.4f}")

    header, rows = _comparison(table)
    out.csv("comparison.csv", header, rows)
    out.write(_manifest(args, {**base.to_dict(), "modes": modes, "smote_scopes": scopes},
                        [args.data, args.schema] + _opt(args.config), started))
    return 0


def _comparison(reports):
    labels = reports[0].label_names
    header = ["mode", "smote_scope", "accuracy"]
    for metric in ("sensitivity", "specificity", "f1"):
        header += [f"{metric}_{name}" for name in labels]
    header += ["g_mean", "auc", "warning"]
    rows = []
    for rep in reports:
        r = rep.table_row()
        scope = r["smote_scope"] if rep.config.mode != "rf_only" else ""
        leak = "leakage" if rep.config.mode != "rf_only" and rep.config.smote_scope == "global" else ""
        rows.append([r["mode"], scope] + [repr(float(r[h])) for h in header[2:-1]] + [leak])
    return header, rows


# -- argument parsing --------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="smote-ga-rf", description="SMOTE + GA feature selection + random forest")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True, config=True):
        if data:
            sp.add_argument("--data", help="input CSV")
            sp.add_argument("--schema", help="schema JSON")
        if config:
            sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    common(sp, data=False)
    sp.add_argument("--preset", choices=["paper"], help="built-in generator config (54 rows, 29 features)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("preprocess", help="drop degenerate columns, impute, rescale")
    common(sp, config=False)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("smote", help="oversample the minority class")
    common(sp, config=False)
    sp.add_argument("--smote-k", type=int, default=None, help="neighbours per minority row (default 6)")
    sp.add_argument("--ratio", type=float, default=1.0, help="target minority/majority ratio")
    sp.set_defaults(func=cmd_smote)

    sp = sub.add_parser("select", help="GA feature selection")
    common(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("train", help="fit and save a forest")
    common(sp)
    sp.add_argument("--mask", help="JSON array of feature names to keep")
    sp.add_argument("--smote", action="store_true", help="oversample before fitting")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="score a CSV with a saved forest")
    common(sp, config=False)
    sp.add_argument("--model", required=True, help="model.json written by 'train'")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("pipeline", help="cross-validate pipeline modes")
    common(sp)
    sp.add_argument("--mode", help=f"comma-separated subset of {','.join(MODES)}")
    sp.add_argument("--folds", type=int, default=None, help="CV folds (default 10)")
    sp.add_argument("--smote-k", type=int, default=None)
    sp.add_argument("--smote-scope", choices=SCOPE_CHOICES, default=None)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
