"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``DA_DETECT_PURE=1`` to
force the numpy path. ``BACKEND`` names whichever was selected.
"""

import os

from . import _pykernels

if os.environ.get("DA_DETECT_PURE") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

iou_matrix = _impl.iou_matrix
nms_sorted = _impl.nms_sorted
roi_pool_forward = _impl.roi_pool_forward
roi_pool_backward = _impl.roi_pool_backward
# the strided numpy view beats the compiled copy loop for im2col
im2col = _pykernels.im2col
col2im = _impl.col2im
fnv1a64 = _impl.fnv1a64

__all__ = [
    "BACKEND",
    "iou_matrix",
    "nms_sorted",
    "roi_pool_forward",
    "roi_pool_backward",
    "im2col",
    "col2im",
    "fnv1a64",
]
