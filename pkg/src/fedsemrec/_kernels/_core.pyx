# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring :mod:`fedsemrec._kernels.pure`.

Same three entry points, same semantics: fused Adam update, nearest-centroid
assignment with lowest-index tie-breaking, distance-weighted centroid update.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

BACKEND = "cython"

ctypedef fused real:
    float
    double


cdef void _adam(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                double lr, double b1, double b2, double eps,
                double bc1, double bc2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double mi, vi
    for i in range(p.shape[0]):
        mi = b1 * (<double>m[i]) + (1.0 - b1) * (<double>g[i])
        vi = b2 * (<double>v[i]) + (1.0 - b2) * (<double>g[i]) * (<double>g[i])
        m[i] = <real>mi
        v[i] = <real>vi
        p[i] = <real>((<double>p[i]) - lr * (mi / bc1) / (sqrt(vi / bc2) + eps))


def adam_step(param, grad, m, v, double lr, double beta1, double beta2,
              double eps, long t):
    """Bias-corrected Adam update, in place on param/m/v (any shape)."""
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    p = param.reshape(-1)
    g = np.ascontiguousarray(grad, dtype=param.dtype).reshape(-1)
    mm = m.reshape(-1)
    vv = v.reshape(-1)
    cdef float[::1] p32, g32, m32, v32
    cdef double[::1] p64, g64, m64, v64
    if param.dtype == np.float32:
        p32, g32, m32, v32 = p, g, mm, vv
        _adam(p32, g32, m32, v32, lr, beta1, beta2, eps, bc1, bc2)
    else:
        p64, g64, m64, v64 = p, g, mm, vv
        _adam(p64, g64, m64, v64, lr, beta1, beta2, eps, bc1, bc2)


cdef void _assign(real[:, ::1] x, real[:, ::1] c, cnp.int64_t[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n = x.shape[0], K = c.shape[0], d = x.shape[1]
    cdef double best, cur, diff
    cdef Py_ssize_t arg
    for i in range(n):
        best = INFINITY
        arg = 0
        for j in range(K):
            cur = 0.0
            for k in range(d):
                diff = (<double>x[i, k]) - (<double>c[j, k])
                cur += diff * diff
            if cur < best:
                best = cur
                arg = j
        out[i] = arg


def assign_nearest(points, centroids):
    """Index of the squared-Euclidean nearest centroid per point."""
    pts = np.ascontiguousarray(points)
    cts = np.ascontiguousarray(centroids, dtype=pts.dtype)
    labels = np.empty(pts.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] out = labels
    cdef float[:, ::1] x32, c32
    cdef double[:, ::1] x64, c64
    if pts.dtype == np.float32:
        x32, c32 = pts, cts
        _assign(x32, c32, out)
    else:
        x64, c64 = pts, cts
        _assign(x64, c64, out)
    return labels


cdef void _wupdate(real[:, ::1] x, cnp.int64_t[::1] lab, real[:, ::1] cold,
                   double eps, double[:, ::1] num, double[::1] den,
                   real[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n = x.shape[0], K = cold.shape[0], d = x.shape[1]
    cdef double dist, diff, w
    for i in range(n):
        j = lab[i]
        dist = 0.0
        for k in range(d):
            diff = (<double>x[i, k]) - (<double>cold[j, k])
            dist += diff * diff
        w = 1.0 / (sqrt(dist) + eps)
        for k in range(d):
            num[j, k] += w * (<double>x[i, k])
        den[j] += w
    for j in range(K):
        if den[j] > 0.0:
            for k in range(d):
                out[j, k] = <real>(num[j, k] / den[j])
        else:
            for k in range(d):
                out[j, k] = cold[j, k]


def weighted_centroid_update(points, labels, old_centroids, double epsilon):
    """Distance-weighted cluster means; empty clusters keep the old centroid."""
    pts = np.ascontiguousarray(points)
    cold = np.ascontiguousarray(old_centroids, dtype=pts.dtype)
    lab = np.ascontiguousarray(labels, dtype=np.int64)
    k, d = cold.shape
    new = np.empty_like(cold)
    num = np.zeros((k, d), dtype=np.float64)
    den = np.zeros(k, dtype=np.float64)
    cdef cnp.int64_t[::1] lv = lab
    cdef double[:, ::1] numv = num
    cdef double[::1] denv = den
    cdef float[:, ::1] xf, cf, of
    cdef double[:, ::1] xd, cd, od
    if pts.dtype == np.float32:
        xf, cf, of = pts, cold, new
        _wupdate(xf, lv, cf, epsilon, numv, denv, of)
    else:
        xd, cd, od = pts, cold, new
        _wupdate(xd, lv, cd, epsilon, numv, denv, od)
    return new
