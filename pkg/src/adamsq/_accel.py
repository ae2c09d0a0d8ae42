"""Optional numba acceleration with a pure-numpy fallback.

Hot loops are decorated with ``maybe_njit``. When numba is importable and the
environment variable ``ADAMSQ_NO_NUMBA`` is unset (or "0"), the loops compile
with ``nopython=True, cache=True``. Otherwise the undecorated Python function
runs; every caller is written so the fallback produces identical results,
only slower.
"""

import os

_DISABLED = os.environ.get("ADAMSQ_NO_NUMBA", "0") not in ("0", "", "false", "False")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ADAMSQ_NO_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def _njit(*args, **kwargs):
        # mimic the decorator-with-arguments form only; bare @njit unused here
        def wrap(func):
            return func

        return wrap


def maybe_njit(*args, **kwargs):
    """Return numba.njit(cache=True, ...) or a no-op decorator."""
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        kwargs.pop("cache", None)
    return _njit(*args, **kwargs)
