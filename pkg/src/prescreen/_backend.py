"""Kernel selection: compiled extension when importable, numpy otherwise.

Set PRESCREEN_KERNELS=python or PRESCREEN_KERNELS=compiled to force a
choice (the latter raises if the extension is missing, so CI can assert
the build happened).
"""

import os

from . import _kernels_py

_forced = os.environ.get("PRESCREEN_KERNELS", "").strip().lower()

if _forced == "python":
    kernels = _kernels_py
elif _forced == "compiled":
    from . import _kernels as kernels  # noqa: F401  (ImportError is the point)
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py


def kernel_implementation():
    return kernels.IMPLEMENTATION


def all_kernel_modules():
    """Every available kernel implementation, for tests and benchmarks."""
    mods = [_kernels_py]
    try:
        from . import _kernels
        mods.append(_kernels)
    except ImportError:
        pass
    return mods
