"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy versions
are used. Set ``IDC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from idc import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("IDC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from idc import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

cholesky = _impl.cholesky
lower_inverse = _impl.lower_inverse
logdet_from_factor = _impl.logdet_from_factor
nudft = _impl.nudft
neighbor_ratios = _impl.neighbor_ratios
knn = _impl.knn


def get_backend(name: str):
    """Return the kernel module for ``"python"`` or ``"compiled"``."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from idc import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
