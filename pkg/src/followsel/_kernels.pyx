# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror :mod:`followsel._kernels_py`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def jacobi_solve(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                 const double[::1] diag, const double[::1] rhs, double[::1] x0,
                 double tol, Py_ssize_t max_iter):
    """Jacobi sweeps for ``(D - W) x = rhs`` where ``W >= 0`` is given in CSR form.

    Returns ``(x, iterations, relative_residual)``. The returned iterate is the one
    whose residual was measured.
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i, p, it = 0
    cdef double s, r, rmax, scale = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.array(x0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.empty(n, dtype=np.float64)
    cdef double[::1] x = xa
    cdef double[::1] y = ya
    cdef double[::1] tmp

    for i in range(n):
        if fabs(rhs[i]) > scale:
            scale = fabs(rhs[i])
    if scale == 0.0:
        return np.zeros(n), 0, 0.0

    rmax = 0.0
    with nogil:
        while True:
            rmax = 0.0
            for i in range(n):
                s = rhs[i]
                for p in range(indptr[i], indptr[i + 1]):
                    s = s + data[p] * x[indices[p]]
                y[i] = s / diag[i]
                r = fabs(s - diag[i] * x[i])
                if r > rmax:
                    rmax = r
            if rmax <= tol * scale or it >= max_iter:
                break
            tmp = x
            x = y
            y = tmp
            it += 1
    return np.asarray(x).copy(), it, rmax / scale


def rank1_update(double[:, ::1] P, const double[::1] col, const double[::1] row, double scale):
    """In place ``P -= scale * outer(col, row)``."""
    cdef Py_ssize_t n = P.shape[0], m = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double ci
    with nogil:
        for i in range(n):
            ci = scale * col[i]
            if ci != 0.0:
                for j in range(m):
                    P[i, j] -= ci * row[j]


def rank2_update(double[:, ::1] P, const double[::1] col_t, const double[::1] col_v,
                 const double[::1] row_t, const double[::1] row_v,
                 double m00, double m01, double m10, double m11):
    """In place ``P -= [col_t col_v] M [row_t; row_v]`` for a 2x2 matrix ``M``."""
    cdef Py_ssize_t n = P.shape[0], m = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double a, b
    with nogil:
        for i in range(n):
            a = col_t[i] * m00 + col_v[i] * m10
            b = col_t[i] * m01 + col_v[i] * m11
            for j in range(m):
                P[i, j] -= a * row_t[j] + b * row_v[j]


def swap_scores(const double[:, ::1] P, Py_ssize_t t, double alpha_inv_t,
                const long[::1] cands, const double[::1] alpha_inv,
                const double[::1] u, const double[::1] w):
    """Objective decrease for replacing member ``t`` by each candidate."""
    cdef Py_ssize_t k, v, m = cands.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] outa = np.empty(m, dtype=np.float64)
    cdef double[::1] out = outa
    cdef double a = P[t, t] - alpha_inv_t
    cdef double d, ptv, pvt, det
    cdef double ut = u[t], wt = w[t]
    with nogil:
        for k in range(m):
            v = cands[k]
            d = P[v, v] + alpha_inv[v]
            ptv = P[t, v]
            pvt = P[v, t]
            det = a * d - ptv * pvt
            out[k] = (ut * d * wt - ut * ptv * w[v] - u[v] * pvt * wt + u[v] * a * w[v]) / det
    return outa
