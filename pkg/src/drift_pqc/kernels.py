"""Kernel backend selection.

The compiled extension is used when importable; set ``DRIFT_PQC_BACKEND=python``
to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
apply_1q = _kernels_py.apply_1q
apply_2q = _kernels_py.apply_2q

if os.environ.get("DRIFT_PQC_BACKEND", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        apply_1q = _compiled.apply_1q
        apply_2q = _compiled.apply_2q


def backends() -> dict:
    """Every importable backend, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as compiled

        out["cython"] = compiled
    except ImportError:
        pass
    return out
