"""Backend selection for the raster kernels.

The compiled extension is preferred; the NumPy fallback is used when it is
missing or when ``SPATIALPLAN_PURE`` is set to a non-empty value other
than ``0``.
"""
import os

from . import _kernels_py

_force_pure = os.environ.get("SPATIALPLAN_PURE", "") not in ("", "0")

if _force_pure:
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

assign = _impl.assign
cell_moments = _impl.cell_moments
sir_field = _impl.sir_field
load_sums = _impl.load_sums


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["compiled"] = _ckernels
    return found
