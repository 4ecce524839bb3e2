"""Numba switch for the numeric kernels.

Kernels are written as vectorised numpy that numba can also compile. Setting
``BATCHDIST_DISABLE_NUMBA=1`` (or having no numba installed) leaves them as
plain numpy functions.
"""

import os

_FLAG = os.environ.get("BATCHDIST_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def kernel(func):
    """Compile ``func`` with ``numba.njit`` when acceleration is enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
