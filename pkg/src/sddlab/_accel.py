"""Numba toggle.

Set ``SDDLAB_NO_NUMBA=1`` to run every kernel as plain Python/numpy. The
flag is read once at import time.
"""
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SDDLAB_NO_NUMBA", "0").lower() in ("", "0", "false", "no")


def njit(fn=None, **options):
    """Compile ``fn`` with numba when enabled, otherwise return it untouched.

    The original function stays reachable as ``.py_func`` either way so the
    benchmark can time both paths in one process. ``error_model="numpy"``
    drops the per-division zero check, which otherwise blocks vectorisation.
    """
    if fn is None:
        return lambda f: njit(f, **options)
    if USE_NUMBA:
        opts = {"cache": True, "nogil": True, "error_model": "numpy", **options}
        return numba.njit(**opts)(fn)
    fn.py_func = fn
    return fn
