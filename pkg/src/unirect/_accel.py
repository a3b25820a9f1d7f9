"""Numba switch.

Set ``UNIRECT_DISABLE_NUMBA=1`` to force the pure-numpy kernels.  The flag is
read once at import time.
"""
import os

DISABLED = os.environ.get("UNIRECT_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None and not DISABLED


def maybe_njit(func):
    """Compile ``func`` with numba if available, else return ``None``."""
    if numba is None:
        return None
    return numba.njit(cache=True)(func)


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
