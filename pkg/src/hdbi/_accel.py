"""Numba switch.

Set ``HDBI_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. to
compare paths or to run where numba is unavailable.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

DISABLED = os.environ.get("HDBI_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    if DISABLED:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
