"""Numba switch.

Kernels are compiled with numba when it is importable and the environment
variable ``THINSTEKLOV_NUMBA`` is not set to ``0``/``false``/``off``. The
flag is read once at import time; the pure-numpy fallbacks are always
importable so both paths can be compared in-process.
"""

import os

_FLAG = os.environ.get("THINSTEKLOV_NUMBA", "1").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "off", "no")


def maybe_njit(func):
    """Compile ``func`` with ``njit(cache=True, nogil=True)`` if numba is available.

    The returned callable is the compiled dispatcher or ``func`` itself.
    Dispatch between compiled and numpy paths is done by the callers based
    on ``USE_NUMBA``; this decorator only decides whether compilation is
    possible at all.
    """
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func
