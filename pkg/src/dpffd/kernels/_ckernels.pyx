# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-particle kernels. Mirrors ``_reference.py`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log, M_PI

cnp.import_array()

BACKEND = "compiled"


cdef inline double _sign(double d) noexcept nogil:
    # branchless; a NaN difference poisons q through sqrt either way
    return <double>(d > 0.0) - <double>(d < 0.0)


def tank_healthy_step(x, pipes, mu, double pipe_area, double tank_area,
                      double gravity, double ts):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] pv = np.ascontiguousarray(pipes, dtype=np.int64)
    cdef const double[::1] muv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nt = xv.shape[1]
    cdef Py_ssize_t npipe = pv.shape[0]
    out = np.empty((n, nt), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double[::1] rate = np.empty(nt, dtype=np.float64)
    cdef double two_g = 2.0 * gravity
    cdef double d, q, mu_up
    cdef Py_ssize_t p, k, c, i, j
    with nogil:
        for k in range(n):
            for c in range(nt):
                rate[c] = 0.0
            for p in range(npipe):
                i = pv[p, 0]
                j = pv[p, 1]
                d = xv[k, i] - xv[k, j]
                mu_up = muv[j + (i - j) * (d >= 0.0)]
                q = mu_up * pipe_area
                q = q * _sign(d)
                q = q * sqrt(two_g * fabs(d))
                rate[i] = rate[i] - q
                rate[j] = rate[j] + q
            for c in range(nt):
                ov[k, c] = xv[k, c] + ts * (rate[c] / tank_area)
    return out


def gaussian_loglik(x, selector, z, var):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[::1] sv = np.ascontiguousarray(selector, dtype=np.int64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(var, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t m = sv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double const_term = 0.0
    cdef double acc, r
    cdef Py_ssize_t k, c
    for c in range(m):
        const_term += np.log(2.0 * np.pi * vv[c])
    with nogil:
        for k in range(n):
            acc = 0.0
            for c in range(m):
                r = zv[c] - xv[k, sv[c]]
                acc = acc + (r * r) / vv[c]
            ov[k] = (-0.5 * const_term) - 0.5 * acc
    return out


def systematic_indices(weights, double u):
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = wv.shape[0]
    cumulative = np.cumsum(wv)
    cdef const double[::1] cv = cumulative
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t i, j = 0
    cdef double pos
    with nogil:
        for i in range(n):
            pos = (u + <double>i) / <double>n
            while j < n - 1 and pos >= cv[j]:
                j += 1
            ov[i] = j
    return out


def snap_binary(faulty, noise):
    cdef const cnp.uint8_t[:, ::1] fv = np.ascontiguousarray(faulty, dtype=np.uint8)
    cdef const double[:, :, ::1] nv = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef Py_ssize_t m = fv.shape[1]
    out = np.empty((n, m), dtype=np.bool_)
    cdef cnp.uint8_t[:, ::1] ov = out.view(np.uint8)
    cdef double b2, v0, v1, a0, b1, d1, d2
    cdef Py_ssize_t k, j
    with nogil:
        for k in range(n):
            for j in range(m):
                b2 = <double>fv[k, j]
                v0 = (1.0 - b2) + nv[k, j, 0]
                v1 = b2 + nv[k, j, 1]
                a0 = v0 - 1.0
                b1 = v1 - 1.0
                d1 = a0 * a0 + v1 * v1
                d2 = v0 * v0 + b1 * b1
                ov[k, j] = 1 if d1 > d2 else 0
    return out
