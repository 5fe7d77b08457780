"""Optional numba acceleration.

Set ``TEMPLEBP_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
"""
import os

_disabled = os.environ.get("TEMPLEBP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def kernel(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if HAS_NUMBA:
        return _njit(cache=True)(func)
    return func
