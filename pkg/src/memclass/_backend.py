"""Numba/numpy backend selection.

Set ``MEMCLASS_NUMBA=0`` to force the pure-numpy kernels. When numba is not
importable the numpy path is used regardless of the flag.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _flag_enabled(value):
    return value.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _flag_enabled(os.environ.get("MEMCLASS_NUMBA", "1"))


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity otherwise."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def default_threads():
    """Thread count from ``MEMCLASS_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("MEMCLASS_THREADS", "1")))
    except ValueError:
        return 1
