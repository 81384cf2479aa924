"""Optional numba acceleration.

Set ``WISE_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when numba
is importable. The flag is read once, at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("WISE_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is optional
    _numba = None

HAVE_NUMBA = _numba is not None
NUMBA_ENABLED = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise a no-op decorator.

    Compilation is requested regardless of the env flag so tests can compare
    both paths in one process; the flag only changes which path is exported.
    """
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
