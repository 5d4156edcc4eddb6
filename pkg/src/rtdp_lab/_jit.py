"""Optional numba acceleration.

Kernels are written so the same source runs under ``numba.njit`` and as plain
numpy. Set ``RTDP_LAB_NO_NUMBA=1`` to force the numpy path (useful for
debugging and for the benchmark that compares both).
"""
import os

_DISABLED = os.environ.get("RTDP_LAB_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via env flag
    numba = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        fn = args[0]
        return numba.njit(cache=True)(fn) if NUMBA_ENABLED else fn

    def wrap(fn):
        if not NUMBA_ENABLED:
            return fn
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)(fn)

    return wrap
