"""Numpy implementations of the voxel kernels.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are tested against.
"""
import numpy as np

BACKEND = "numpy"


def block_means(data, h, w, d):
    sx, sy, sz = data.shape
    nh, nw, nd = sx // h, sy // w, sz // d
    blocks = np.asarray(data, dtype=np.float64).reshape(nh, h, nw, w, nd, d)
    return blocks.sum(axis=(1, 3, 5)) / float(h * w * d)


def bin_indices(values, edges):
    # side="right" puts a value sitting on an interior edge into the upper bin
    idx = np.searchsorted(edges[1:-1], values, side="right")
    return idx.astype(np.int64)


def neighbor_joint_counts(idx, mask, dx, dy, dz, bins):
    sx, sy, sz = idx.shape
    src = (slice(max(0, -dx), min(sx, sx - dx)),
           slice(max(0, -dy), min(sy, sy - dy)),
           slice(max(0, -dz), min(sz, sz - dz)))
    dst = (slice(max(0, dx), min(sx, sx + dx)),
           slice(max(0, dy), min(sy, sy + dy)),
           slice(max(0, dz), min(sz, sz + dz)))
    both = mask[src].astype(bool) & mask[dst].astype(bool)
    a = idx[src][both].astype(np.int64)
    b = idx[dst][both].astype(np.int64)
    flat = np.bincount(a * bins + b, minlength=bins * bins)
    return flat.reshape(bins, bins).astype(np.int64)
