"""Cavity time-stepping kernels: compiled extension with NumPy fallback.

The recursion over time steps is the one genuinely sequential hot loop in
the simulator, so it gets a fused Cython implementation.  Backend selection
happens at import; set SPECKLE_PUF_BACKEND=python|cython to force one.
The two backends agree to floating-point rounding, not bit-exactly; reruns
on a fixed backend are bit-exact.
"""
from __future__ import annotations

import os

from . import cavity_np

_FORCED = os.environ.get("SPECKLE_PUF_BACKEND")

try:
    from . import _cavity_cy
except ImportError:
    _cavity_cy = None

if _FORCED not in (None, "", "python", "cython"):
    raise RuntimeError(f"unknown SPECKLE_PUF_BACKEND {_FORCED!r}")
if _FORCED == "cython" and _cavity_cy is None:
    raise RuntimeError("SPECKLE_PUF_BACKEND=cython but the extension is not built")

if _FORCED == "python" or _cavity_cy is None:
    _active = cavity_np
else:
    _active = _cavity_cy

BACKEND_NAME = "python" if _active is cavity_np else "cython"


def available_backends() -> tuple[str, ...]:
    return ("python",) if _cavity_cy is None else ("python", "cython")


def get_backend(name: str | None = None):
    """Kernel module by name; None returns the import-time selection."""
    if name in (None, BACKEND_NAME):
        return _active
    if name == "python":
        return cavity_np
    if name == "cython":
        if _cavity_cy is None:
            raise RuntimeError("cython backend is not built")
        return _cavity_cy
    raise ValueError(f"unknown backend {name!r}")


def cavity_features(*args, backend: str | None = None, **kwargs):
    return get_backend(backend).cavity_features(*args, **kwargs)
