"""Optional numba acceleration.

Set ``CURRES_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python over numpy arrays. Both paths consume the same ``numpy.random.Generator``
stream and produce identical results.
"""
import os

NUMBA_DISABLED = os.environ.get("CURRES_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not NUMBA_DISABLED


def jit(func):
    """``numba.njit(nogil=True, cache=True)`` or the identity."""
    if USE_NUMBA:
        return numba.njit(nogil=True, cache=True)(func)
    return func
