"""Kernel selection: compiled extension when available, pure Python otherwise.

The compiled module is optional; everything works (slower) without it.
``ASYMFRAC_KERNEL=python`` in the environment forces the fallback, which is
handy for benchmarking the two implementations against each other.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _ckernels
    HAVE_COMPILED = True
except ImportError:
    _ckernels = None
    HAVE_COMPILED = False

KERNEL_NAMES = ("auto", "compiled", "python")


def _read_default() -> str:
    env = os.environ.get("ASYMFRAC_KERNEL", "auto").lower()
    if env not in KERNEL_NAMES:
        raise ValueError(f"ASYMFRAC_KERNEL must be one of {KERNEL_NAMES}, got {env!r}")
    if env == "auto":
        return "compiled" if HAVE_COMPILED else "python"
    return env


# the environment variable is honored once, at import
DEFAULT_KERNEL = _read_default()
_IMPLS = {"python": _kernels_py, "compiled": _ckernels}


def available_kernels() -> tuple[str, ...]:
    return ("compiled", "python") if HAVE_COMPILED else ("python",)


def resolve(kernel: str = "auto"):
    """Map a kernel name to its implementation module."""
    if kernel == "auto":
        kernel = DEFAULT_KERNEL
    impl = _IMPLS.get(kernel)
    if impl is None:
        if kernel == "compiled":
            raise RuntimeError("compiled kernels are not available in this install")
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNEL_NAMES}")
    return impl


def active_kernel_name(kernel: str = "auto") -> str:
    return "compiled" if resolve(kernel) is _ckernels else "python"
