"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``MEASURE_FORGE_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

fallback = _kernels_py

if os.environ.get("MEASURE_FORGE_PURE", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

active = compiled if compiled is not None else fallback
BACKEND = active.BACKEND

lmo_scan = active.lmo_scan
correlate = active.correlate
project_capped_simplex = active.project_capped_simplex
dual_subgradient = active.dual_subgradient


def available():
    """Names of the importable backends."""
    names = ["python"]
    if compiled is not None:
        names.insert(0, "cython")
    return names


def get(name):
    if name == "python":
        return fallback
    if name == "cython" and compiled is not None:
        return compiled
    raise ValueError(f"kernel backend {name!r} is not available")
