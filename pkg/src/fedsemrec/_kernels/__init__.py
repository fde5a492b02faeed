"""Kernel backend selection.

Prefers the compiled Cython extension (``_core``) when it was built;
falls back to the NumPy implementations in ``pure``. Setting the
environment variable ``FEDSEMREC_PURE=1`` forces the fallback, which is
how the benchmark and the equivalence tests pin each backend.
"""

from __future__ import annotations

import os

if os.environ.get("FEDSEMREC_PURE", "") == "1":
    from .pure import BACKEND, adam_step, assign_nearest, weighted_centroid_update
else:
    try:
        from ._core import BACKEND, adam_step, assign_nearest, weighted_centroid_update
    except ImportError:
        from .pure import BACKEND, adam_step, assign_nearest, weighted_centroid_update

__all__ = ["BACKEND", "adam_step", "assign_nearest", "weighted_centroid_update"]
