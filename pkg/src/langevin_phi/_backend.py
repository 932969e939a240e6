"""Kernel backend selection.

Hot loops (Philox block generation, the rejection RGO) have a numba
implementation and a vectorized numpy implementation. Which one the public
API dispatches to is chosen once at import time from ``LANGEVIN_PHI_BACKEND``:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numba``: require numba
* ``numpy``: never touch numba
"""

from __future__ import annotations

import os

_requested = os.environ.get("LANGEVIN_PHI_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ImportError(
        f"LANGEVIN_PHI_BACKEND must be one of auto, numba, numpy; got {_requested!r}"
    )

try:
    if _requested == "numpy":
        raise ImportError("numba disabled by LANGEVIN_PHI_BACKEND")
    import numba

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False
    if _requested == "numba":
        raise

BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` when numba is active, identity otherwise."""
    if NUMBA_AVAILABLE:
        return numba.njit(cache=True)(func)
    return func
