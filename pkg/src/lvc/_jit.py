"""JIT switch for the numeric kernels.

Set ``LVC_DISABLE_JIT=1`` to run every kernel as plain Python/numpy, which is
slow but debuggable with the interpreter. The choice is made once, at import.
"""

import os

_FLAG = os.environ.get("LVC_DISABLE_JIT", "0").strip().lower()
JIT_ENABLED = _FLAG not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper


__all__ = ["JIT_ENABLED", "njit"]
