"""Numba switch.

Set ``PRIVP0_PURE_NUMPY=1`` in the environment to route every hot kernel
through its numpy implementation instead of the jitted one. The flag is read
once at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("PRIVP0_PURE_NUMPY", "").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, else an identity decorator."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)

    def _decorator(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return _decorator
