"""Compare the numba and pure-numpy tree kernels.

    python3 benchmarks/bench_backends.py --rows 200 --features 27 --trees 50

Both backends grow the same trees (checked here too); only the speed differs.
"""
import argparse
import time

import numpy as np

from smote_ga_rf import _accel
from smote_ga_rf.dataset import Dataset, FeatureSpec
from smote_ga_rf.forest import ForestConfig, fit


def make_data(n, f, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, f))
    y = (x[:, 0] + 0.5 * x[:, 1] + rng.normal(scale=0.8, size=n) > 0).astype(np.int64)
    specs = [FeatureSpec(f"f{j}", "continuous") for j in range(f)]
    return Dataset(x, y, specs)


def time_fit(ds, cfg, backend, repeats):
    with _accel.use_backend(backend):
        rf = fit(ds, cfg)  # warm-up (and numba compile)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            rf = fit(ds, cfg)
            best = min(best, time.perf_counter() - t0)
    return best, rf


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200)
    ap.add_argument("--features", type=int, default=27)
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = make_data(args.rows, args.features, args.seed)
    cfg = ForestConfig(n_trees=args.trees, seed=args.seed)
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    results = {}
    for b in backends:
        results[b] = time_fit(ds, cfg, b, args.repeats)
        sec = results[b][0]
        print(f"{b:6s} {sec * 1e3:9.1f} ms/forest  {sec / args.trees * 1e6:9.1f} us/tree")
    if len(results) == 2:
        (t_np, rf_np), (t_nb, rf_nb) = results["numpy"], results["numba"]
        same = all(a.same_as(b) for a, b in zip(rf_np.trees, rf_nb.trees))
        print(f"speedup {t_np / t_nb:.1f}x  identical trees: {same}")
    else:
        print("numba not installed; only the numpy backend was timed")


if __name__ == "__main__":
    main()
