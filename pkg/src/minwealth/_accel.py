"""Backend selection for the hot kernels.

Numba is used when importable unless ``MINWEALTH_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel runs its vectorized numpy twin.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("MINWEALTH_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity otherwise.

    Kernels are always compiled if numba exists so the benchmark can compare
    both paths; ``USE_NUMBA`` only decides which one the library dispatches to.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
