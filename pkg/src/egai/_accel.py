"""Optional numba acceleration.

Kernels are written once as plain Python/numpy loops and decorated with
:func:`njit`. When numba is importable and ``EGAI_DISABLE_NUMBA`` is unset (or
``0``), they are compiled; otherwise the decorator is the identity and the
same loops run as interpreted numpy code.
"""

import os

_flag = os.environ.get("EGAI_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError("numba disabled by EGAI_DISABLE_NUMBA")
    import numba
except ImportError:
    numba = None

NUMBA_ENABLED = numba is not None


def njit(*args, **kwargs):
    if numba is not None:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def python_impl(func):
    """Return the uncompiled Python function behind a kernel."""
    return getattr(func, "py_func", func)
