import numpy as np
import pytest

from smote_ga_rf import _accel
from smote_ga_rf.dataset import Dataset, FeatureSpec


def make_ds(x, y, kinds=None, label_names=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    kinds = kinds or ["continuous"] * x.shape[1]
    specs = []
    for j, k in enumerate(kinds):
        if k == "categorical":
            specs.append(FeatureSpec(f"f{j}", k, cardinality=int(np.nanmax(x[:, j])) + 1))
        else:
            specs.append(FeatureSpec(f"f{j}", k))
    return Dataset(x, np.asarray(y), specs, None, tuple(label_names or ()))


def gaussian_ds(n, f, informative=1, sep=2.0, seed=0):
    """Two balanced classes; the first ``informative`` columns shift by ``sep``."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(size=(n, f))
    x[:, :informative] += sep * (y[:, None] - 0.5)
    return make_ds(x, y)


@pytest.fixture(params=["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"])
def backend(request):
    with _accel.use_backend(request.param):
        yield request.param


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
