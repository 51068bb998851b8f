# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors :mod:`spinfridge._pykernels` exactly."""
import numpy as np

from libc.math cimport fabs
from libc.stdlib cimport malloc, free


cdef extern from "complex.h" nogil:
    double cabs(double complex)


def closed_form_denominator(const double[::1] w, double g, double linewidth,
                            double r, double delta):
    cdef Py_ssize_t n = w.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double g2 = g * g, x, y
    cdef double a = 0.25 * r * r, b = 0.25 * linewidth * linewidth
    cdef double c = 0.5 * r * linewidth
    with nogil:
        for i in range(n):
            x = w[i]
            y = x - delta
            o[i] = (a + x * x) * (b + y * y) + g2 * (c - 2.0 * x * y) + g2 * g2
    return out


cdef Py_ssize_t _row_solve(const double complex[:, ::1] drift, double omega,
                           Py_ssize_t port, double complex* m,
                           double complex* out) noexcept nogil:
    # Solve M^T y = e_port for M = -i omega I - drift; y is row `port` of M^-1.
    cdef Py_ssize_t d = drift.shape[0], i, j, k, piv
    cdef double best, mag
    cdef double complex f, tmp
    for i in range(d):
        for j in range(d):
            m[i * d + j] = -drift[j, i]
        m[i * d + i] = m[i * d + i] - 1j * omega
        out[i] = 0.0
    out[port] = 1.0
    for k in range(d):
        piv = k
        best = cabs(m[k * d + k])
        for i in range(k + 1, d):
            mag = cabs(m[i * d + k])
            if mag > best:
                best = mag
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(d):
                tmp = m[k * d + j]
                m[k * d + j] = m[piv * d + j]
                m[piv * d + j] = tmp
            tmp = out[k]
            out[k] = out[piv]
            out[piv] = tmp
        for i in range(k + 1, d):
            f = m[i * d + k] / m[k * d + k]
            if f != 0.0:
                for j in range(k, d):
                    m[i * d + j] = m[i * d + j] - f * m[k * d + j]
                out[i] = out[i] - f * out[k]
    for k in range(d - 1, -1, -1):
        tmp = out[k]
        for j in range(k + 1, d):
            tmp = tmp - m[k * d + j] * out[j]
        out[k] = tmp / m[k * d + k]
    return 0


def resolvent_row(const double complex[:, ::1] drift, const double[::1] w,
                  Py_ssize_t port):
    cdef Py_ssize_t n = w.shape[0], d = drift.shape[0], i, j, bad = -1
    result = np.empty((n, d), dtype=np.complex128)
    cdef double complex[:, ::1] res = result
    cdef double complex* m = <double complex*> malloc(d * d * sizeof(double complex))
    cdef double complex* y = <double complex*> malloc(d * sizeof(double complex))
    if m == NULL or y == NULL:
        free(m)
        free(y)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                if _row_solve(drift, w[i], port, m, y) != 0:
                    bad = i
                    break
                for j in range(d):
                    res[i, j] = y[j]
    finally:
        free(m)
        free(y)
    return result, bad


def resolvent_rows_stack(const double complex[:, :, ::1] drifts, const double[::1] w,
                         Py_ssize_t port):
    """Like :func:`resolvent_row` for a stack of drift matrices; result (n_drift, n_w, d)."""
    cdef Py_ssize_t nd = drifts.shape[0], d = drifts.shape[1], n = w.shape[0]
    cdef Py_ssize_t k, i, j, bad = -1
    result = np.empty((nd, n, d), dtype=np.complex128)
    cdef double complex[:, :, ::1] res = result
    cdef double complex* m = <double complex*> malloc(d * d * sizeof(double complex))
    cdef double complex* y = <double complex*> malloc(d * sizeof(double complex))
    if m == NULL or y == NULL:
        free(m)
        free(y)
        raise MemoryError()
    try:
        with nogil:
            for k in range(nd):
                for i in range(n):
                    if _row_solve(drifts[k], w[i], port, m, y) != 0:
                        bad = k * n + i
                        break
                    for j in range(d):
                        res[k, i, j] = y[j]
                if bad >= 0:
                    break
    finally:
        free(m)
        free(y)
    return result, bad
