"""Kernel selection: compiled extension when available, numpy otherwise.

The active implementation is chosen once at import time. Set
``EPIALIGN_KERNEL=pure`` to force the numpy fallback or
``EPIALIGN_KERNEL=compiled`` to require the extension (raising if it is not
built); the default ``auto`` prefers the extension.
"""

import os

from . import _kernels_np

MODE_ALGEBRAIC = _kernels_np.MODE_ALGEBRAIC
MODE_GEOMETRIC = _kernels_np.MODE_GEOMETRIC
LINE_NORMAL_EPS = _kernels_np.LINE_NORMAL_EPS
GRAD_DEADZONE = _kernels_np.GRAD_DEADZONE

_choice = os.environ.get("EPIALIGN_KERNEL", "auto").strip().lower()

if _choice == "pure":
    _impl = _kernels_np
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _kernels_np

active_impl = _impl.IMPL
pair_residuals = _impl.pair_residuals
pair_accumulate = _impl.pair_accumulate


def implementations():
    """All importable kernel implementations, for tests and benchmarks."""
    impls = {"numpy": _kernels_np}
    try:
        from . import _kernels_cy
        impls["compiled"] = _kernels_cy
    except ImportError:
        pass
    return impls


def mode_id(name: str) -> int:
    if name == "algebraic":
        return MODE_ALGEBRAIC
    if name == "geometric":
        return MODE_GEOMETRIC
    raise ValueError(f"unknown residual mode {name!r}")
