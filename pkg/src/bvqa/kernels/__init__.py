"""Numeric hot-path kernels.

Each kernel has a numba-compiled implementation and a pure-numpy fallback.
Selection happens once at import time: set ``BVQA_NUMBA=0`` in the
environment to force the numpy path (useful for debugging and as a
reference for benchmarking, see ``benchmarks/kernel_bench.py``).
"""

from __future__ import annotations

import os

_want_numba = os.environ.get("BVQA_NUMBA", "1") not in ("0", "false", "no")

NUMBA_ENABLED = False
if _want_numba:
    try:
        from . import _numba_impl as _impl

        NUMBA_ENABLED = True
    except ImportError:
        from . import _numpy_impl as _impl
else:
    from . import _numpy_impl as _impl

resize_bilinear = _impl.resize_bilinear
separable_filter = _impl.separable_filter
smo_solve = _impl.smo_solve

__all__ = ["resize_bilinear", "separable_filter", "smo_solve", "NUMBA_ENABLED"]
