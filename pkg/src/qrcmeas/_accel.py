"""Optional numba acceleration.

Hot kernels are written twice: a loop version compiled with numba and a
vectorised pure-numpy version. Which one the public dispatchers call is
decided once, at import time:

* numba must be importable, and
* ``QRCMEAS_DISABLE_NUMBA`` must not be set to a truthy value.

Both versions stay importable so benchmarks and tests can compare them
inside one process.
"""

from __future__ import annotations

import os

ENV_FLAG = "QRCMEAS_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    The numba variants are compiled lazily on first call regardless of
    ``USE_NUMBA``; the flag only controls the default dispatch.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def backend() -> str:
    """Name of the kernel backend used by default dispatch."""
    return "numba" if USE_NUMBA else "numpy"
