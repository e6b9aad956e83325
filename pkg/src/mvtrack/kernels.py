"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``MVTRACK_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
hungarian_square = _kernels_py.hungarian_square
pose_cost_matrix = _kernels_py.pose_cost_matrix

if os.environ.get("MVTRACK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None
    if _ext is not None:
        BACKEND = "compiled"
        hungarian_square = _ext.hungarian_square
        pose_cost_matrix = _ext.pose_cost_matrix


def backends() -> dict:
    """All importable backends by name, for benchmarks and equivalence tests."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as ext
    except ImportError:
        pass
    else:
        out["compiled"] = ext
    return out
