"""Backend selection for the hot simulation kernels.

Kernels are written twice: a scalar loop version compiled with numba's
``njit`` and a vectorized numpy version.  ``PULSESYNC_BACKEND`` picks one
(``numba`` or ``numpy``); the default is numba when it imports.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_ENV = "PULSESYNC_BACKEND"


def njit(*args, **kwargs):
    """``numba.njit`` with project defaults, or identity without numba."""
    opts = dict(cache=True, nogil=True)
    opts.update(kwargs)

    def wrap(fn):
        if not HAS_NUMBA:
            return fn
        return numba.njit(**opts)(fn)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def default_backend():
    name = os.environ.get(_ENV, "").strip().lower()
    if name in ("numpy", "python", "0", "off", "no"):
        return "numpy"
    if name in ("", "numba", "1", "on", "yes"):
        return "numba" if HAS_NUMBA else "numpy"
    raise ValueError(f"{_ENV} must be 'numba' or 'numpy', got {name!r}")


def resolve_backend(backend=None):
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        return "numpy"
    return backend
