# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled voxel kernels. Semantics mirror ``humask._kernels_py`` exactly."""
import numpy as np

cimport cython
from libc.math cimport fabs

BACKEND = "cython"


def block_means(const float[:, :, :] data, int h, int w, int d):
    cdef Py_ssize_t nh = data.shape[0] // h
    cdef Py_ssize_t nw = data.shape[1] // w
    cdef Py_ssize_t nd = data.shape[2] // d
    out_arr = np.empty((nh, nw, nd), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, x, y, z
    cdef double s, c, t, v
    cdef double count = <double>h * w * d
    for i in range(nh):
        for j in range(nw):
            for k in range(nd):
                # Neumaier compensated summation
                s = 0.0
                c = 0.0
                for x in range(i * h, (i + 1) * h):
                    for y in range(j * w, (j + 1) * w):
                        for z in range(k * d, (k + 1) * d):
                            v = data[x, y, z]
                            t = s + v
                            if fabs(s) >= fabs(v):
                                c += (s - t) + v
                            else:
                                c += (v - t) + s
                            s = t
                out[i, j, k] = (s + c) / count
    return out_arr


def bin_indices(const double[::1] values, const double[::1] edges):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t nb = edges.shape[0] - 1
    cdef double lo = edges[0]
    cdef double hi = edges[nb]
    cdef double scale = nb / (hi - lo)
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double v
    for i in range(n):
        v = values[i]
        if v <= lo:
            k = 0
        elif v >= hi:
            k = nb - 1
        else:
            k = <Py_ssize_t>((v - lo) * scale)
            if k > nb - 1:
                k = nb - 1
            while k + 1 < nb and v >= edges[k + 1]:
                k += 1
            while k > 0 and v < edges[k]:
                k -= 1
        out[i] = k
    return out_arr


def neighbor_joint_counts(const int[:, :, :] idx, const unsigned char[:, :, :] mask,
                          int dx, int dy, int dz, int bins):
    cdef Py_ssize_t sx = idx.shape[0], sy = idx.shape[1], sz = idx.shape[2]
    counts_arr = np.zeros((bins, bins), dtype=np.int64)
    cdef long long[:, ::1] counts = counts_arr
    cdef Py_ssize_t x0 = max(0, -dx), x1 = min(sx, sx - dx)
    cdef Py_ssize_t y0 = max(0, -dy), y1 = min(sy, sy - dy)
    cdef Py_ssize_t z0 = max(0, -dz), z1 = min(sz, sz - dz)
    cdef Py_ssize_t x, y, z
    for x in range(x0, x1):
        for y in range(y0, y1):
            for z in range(z0, z1):
                if mask[x, y, z] and mask[x + dx, y + dy, z + dz]:
                    counts[idx[x, y, z], idx[x + dx, y + dy, z + dz]] += 1
    return counts_arr
