# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the fused hot paths.

Same API and conventions as kernels/numpy_backend.py (the reference
implementation). Hand-written loops only pay off where they fuse several
vectorized passes into one (softmax, normalization, masked backwards, column
sums, reductions); for BLAS-shaped matmuls and single-pass elementwise math,
numpy's kernels are already optimal, so those names re-export the reference
implementation.
"""

from libc.math cimport exp as c_exp, sqrt as c_sqrt

import numpy as np

from .numpy_backend import (
    add,
    add_rowvec,
    add_scalar,
    exp,
    log,
    matmul_nn,
    matmul_nt,
    matmul_tn,
    mul,
    mul_scalar,
    sub,
    transpose,
)


def col_sums(double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    out_np = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[j] += a[i, j]
    return out_np


def relu(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    for i in range(n):
        out[i] = a[i] if a[i] > 0.0 else 0.0
    return out_np


def relu_backward(double[::1] g, double[::1] x):
    cdef Py_ssize_t n = g.shape[0], i
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    for i in range(n):
        out[i] = g[i] if x[i] > 0.0 else 0.0
    return out_np


def log_backward(double[::1] g, double[::1] x):
    cdef Py_ssize_t n = g.shape[0], i
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    for i in range(n):
        out[i] = g[i] / x[i]
    return out_np


def clamp_min(double[::1] a, double c):
    cdef Py_ssize_t n = a.shape[0], i
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    for i in range(n):
        out[i] = a[i] if a[i] > c else c
    return out_np


def clamp_min_backward(double[::1] g, double[::1] x, double c):
    cdef Py_ssize_t n = g.shape[0], i
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    for i in range(n):
        out[i] = g[i] if x[i] > c else 0.0
    return out_np


def total_sum(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i]
    return acc


def sumsq(double[::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * a[i]
    return acc


cdef void _softmax_row(double[::1] z, double[::1] out) noexcept:
    cdef Py_ssize_t n = z.shape[0], i
    cdef double m = z[0], s = 0.0
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    for i in range(n):
        out[i] = c_exp(z[i] - m)
        s += out[i]
    for i in range(n):
        out[i] /= s


def softmax(a):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr.reshape(1, -1)
    cdef double[:, ::1] z = arr
    out_np = np.empty((z.shape[0], z.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        _softmax_row(z[i], out[i])
    return out_np.reshape(-1) if squeeze else out_np


def softmax_backward(g, y):
    garr = np.ascontiguousarray(g, dtype=np.float64)
    yarr = np.ascontiguousarray(y, dtype=np.float64)
    squeeze = garr.ndim == 1
    if squeeze:
        garr = garr.reshape(1, -1)
        yarr = yarr.reshape(1, -1)
    cdef double[:, ::1] gv = garr
    cdef double[:, ::1] yv = yarr
    cdef Py_ssize_t m = gv.shape[0], n = gv.shape[1], i, j
    out_np = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += gv[i, j] * yv[i, j]
        for j in range(n):
            out[i, j] = yv[i, j] * (gv[i, j] - s)
    return out_np.reshape(-1) if squeeze else out_np


def normalize(a):
    """L2-normalize over the last axis; returns (normalized, norms)."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr.reshape(1, -1)
    cdef double[:, ::1] x = arr
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], i, j
    out_np = np.empty((m, n), dtype=np.float64)
    norms_np = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double[::1] norms = norms_np
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += x[i, j] * x[i, j]
        s = c_sqrt(s)
        norms[i] = s
        for j in range(n):
            out[i, j] = x[i, j] / s
    if squeeze:
        return out_np.reshape(-1), float(norms_np[0])
    return out_np, norms_np


def normalize_backward(g, y, norms):
    garr = np.ascontiguousarray(g, dtype=np.float64)
    yarr = np.ascontiguousarray(y, dtype=np.float64)
    squeeze = garr.ndim == 1
    if squeeze:
        garr = garr.reshape(1, -1)
        yarr = yarr.reshape(1, -1)
        narr = np.array([norms], dtype=np.float64)
    else:
        narr = np.ascontiguousarray(norms, dtype=np.float64)
    cdef double[:, ::1] gv = garr
    cdef double[:, ::1] yv = yarr
    cdef double[::1] nv = narr
    cdef Py_ssize_t m = gv.shape[0], n = gv.shape[1], i, j
    out_np = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += gv[i, j] * yv[i, j]
        for j in range(n):
            out[i, j] = (gv[i, j] - s * yv[i, j]) / nv[i]
    return out_np.reshape(-1) if squeeze else out_np
