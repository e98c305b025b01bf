"""Backend switch for the compiled tree kernels.

The tree kernels come in two flavours: loop-style functions compiled with
numba, and a vectorised pure-numpy path.  Both consume the same counter-based
random stream, so a forest grown with either backend is the same forest.

Set ``SMOTE_GA_RF_BACKEND=numpy`` to force the fallback (numba is also skipped
automatically when it is not importable).
"""
import contextlib
import os

BACKEND_ENV = "SMOTE_GA_RF_BACKEND"

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def _initial_backend():
    requested = os.environ.get(BACKEND_ENV, "").strip().lower()
    if requested in ("numpy", "python", "off", "0"):
        return "numpy"
    if requested == "numba" and not HAVE_NUMBA:
        raise ImportError(f"{BACKEND_ENV}=numba but numba is not installed")
    return "numba" if HAVE_NUMBA else "numpy"


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ImportError("numba is not installed")
    _backend = name


@contextlib.contextmanager
def use_backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def kernels():
    """Return the kernel module for the active backend."""
    if _backend == "numba":
        from .forest import _kernels_numba as mod
    else:
        from .forest import _kernels_numpy as mod
    return mod
