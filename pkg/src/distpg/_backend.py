"""Backend selection: compiled rollout kernel when available, numpy otherwise.

Set DISTPG_BACKEND=python or DISTPG_BACKEND=compiled to force a choice;
the default "auto" prefers the compiled extension.  Within a backend all
results are bit-reproducible for a fixed seed; across backends they agree
to floating-point noise only.
"""

from __future__ import annotations

import os

try:
    from . import _speedups
except ImportError:
    _speedups = None

VALID = ("auto", "python", "compiled")


def resolve(backend: str = "auto") -> str:
    if backend not in VALID:
        raise ValueError(f"backend must be one of {VALID}, got {backend!r}")
    if backend == "auto":
        backend = os.environ.get("DISTPG_BACKEND", "auto")
        if backend not in VALID:
            raise ValueError(f"DISTPG_BACKEND must be one of {VALID}, got {backend!r}")
    if backend == "compiled" and _speedups is None:
        raise RuntimeError("compiled backend requested but the extension is not built")
    if backend == "auto":
        return "compiled" if _speedups is not None else "python"
    return backend


def compiled_available() -> bool:
    return _speedups is not None


def mc_rollout_kernel(backend: str):
    from . import _py_kernels
    if resolve(backend) == "compiled":
        return _speedups.mc_rollout
    return _py_kernels.mc_rollout
