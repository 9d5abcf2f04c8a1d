"""Backend selection for the hot geometry kernels.

Two interchangeable implementations exist: vectorized pure numpy
(`numpy_impl`) and numba @njit loops (`numba_impl`). The numba backend is
picked whenever numba imports cleanly; set VOTETRACK_BACKEND=numpy to force
the fallback, or VOTETRACK_BACKEND=numba to fail hard when numba is missing.
"""
import os

from . import numpy_impl

_choice = os.environ.get("VOTETRACK_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ImportError(
        f"VOTETRACK_BACKEND must be 'numba', 'numpy' or unset, got {_choice!r}"
    )

if _choice == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"

pairwise_distances = _impl.pairwise_distances
farthest_point_indices = _impl.farthest_point_indices
box_frame_mask = _impl.box_frame_mask
rect_intersection_area = _impl.rect_intersection_area


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND
