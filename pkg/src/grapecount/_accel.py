"""Optional numba acceleration.

Hot raster kernels are written twice: a numba ``@njit`` loop and a
vectorized numpy equivalent. Which one the public functions dispatch to is
fixed at import time:

* ``GRAPECOUNT_DISABLE_NUMBA=1`` forces the numpy path;
* otherwise numba is used when it can be imported.

Both paths must give bit-identical results; the test suite checks this.
"""

import os

_FLAG = "GRAPECOUNT_DISABLE_NUMBA"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get(_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
)


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Kernels are always compiled lazily, so decorating costs nothing when the
    numpy path is selected.
    """
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
