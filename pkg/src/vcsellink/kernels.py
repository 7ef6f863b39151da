"""Kernel backend selection: compiled Cython extension if present, numpy fallback otherwise.

Set VCSELLINK_PURE_PYTHON=1 to force the fallback (used by the benchmark).
"""
from __future__ import annotations

import os

if os.environ.get("VCSELLINK_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

prbs_fill = _impl.prbs_fill
lms_run = _impl.lms_run
viterbi_forward = _impl.viterbi_forward
