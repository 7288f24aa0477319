"""Optional numba acceleration.

Set ``STLTUBE_NUMBA=0`` to force the pure-numpy code paths.  The flag is read
once at import time; kernels call :func:`use_numba` to pick a path.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_ENABLED = numba is not None and os.environ.get("STLTUBE_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def use_numba():
    return _ENABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
