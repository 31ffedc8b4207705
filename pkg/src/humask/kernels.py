"""Kernel dispatch.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback is. Set ``HUMASK_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("HUMASK_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def available_backends():
    names = {"numpy": _kernels_py}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        names["cython"] = _ckernels
    return names


def block_means(data, sub, impl=None):
    """Mean of each ``sub``-shaped block of ``data`` as a float64 grid."""
    impl = impl or _impl
    h, w, d = (int(s) for s in sub)
    arr = np.asarray(data, dtype=np.float32)
    return impl.block_means(arr, h, w, d)


def bin_indices(values, edges, impl=None):
    """Histogram bin of each value; out-of-range values go to the end bins."""
    impl = impl or _impl
    vals = np.ascontiguousarray(np.ravel(values), dtype=np.float64)
    return impl.bin_indices(vals, np.ascontiguousarray(edges, dtype=np.float64))


def neighbor_joint_counts(idx, mask, offset, bins, impl=None):
    """Joint bin counts of (idx[x], idx[x + offset]) with both ends in ``mask``."""
    impl = impl or _impl
    dx, dy, dz = (int(o) for o in offset)
    idx = np.asarray(idx, dtype=np.int32)
    mask = np.asarray(mask, dtype=np.uint8)
    return impl.neighbor_joint_counts(idx, mask, dx, dy, dz, int(bins))
