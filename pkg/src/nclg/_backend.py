"""Kernel backend selection.

The hot loops (point location, foot evaluation, transport scatter) have two
implementations: a numba ``@njit`` version and a vectorised numpy version.
Set ``NCLG_BACKEND=numpy`` to force the pure-numpy path; the default is
``numba`` when the package is importable.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_VALID = ("numba", "numpy")


def _initial_backend():
    name = os.environ.get("NCLG_BACKEND", "numba").strip().lower()
    if name not in _VALID:
        raise ValueError(f"NCLG_BACKEND must be one of {_VALID}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Switch backend at runtime (used by tests and the benchmark)."""
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f
