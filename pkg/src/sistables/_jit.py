"""numba switch.

Set ``SISTABLES_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy (same source, no compilation). Useful for debugging and for the
benchmark that compares both paths.
"""
import os

DISABLED = os.environ.get("SISTABLES_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with caching and nogil, or the identity when disabled."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


def backend() -> str:
    return "numba" if HAVE_NUMBA else "python"
