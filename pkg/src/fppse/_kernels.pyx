# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels over a CSR stack of low-rank factor rows.

Row ``k`` of the stack belongs to constraint ``owner[k]``; the quadratic part
of constraint ``j`` is the sum of squares of its rows applied to ``u``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def quad_eval(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
              const double[::1] data, const cnp.int64_t[::1] owner,
              const double[::1] u, Py_ssize_t m, double scale):
    """Return ``(q, G)`` with ``q[j] = sum (F_k u)^2`` and ``G[j] = scale * sum (F_k u) F_k``."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    q_arr = np.zeros(m, dtype=np.float64)
    g_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef double[:, ::1] g = g_arr
    cdef Py_ssize_t k, p, j
    cdef double dot
    for k in range(nrows):
        dot = 0.0
        for p in range(indptr[k], indptr[k + 1]):
            dot += data[p] * u[indices[p]]
        j = owner[k]
        q[j] += dot * dot
        dot *= scale
        for p in range(indptr[k], indptr[k + 1]):
            g[j, indices[p]] += dot * data[p]
    return q_arr, g_arr


def gram(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
         const double[::1] data, const double[::1] row_weight, Py_ssize_t n):
    """Return the dense ``sum_k row_weight[k] F_k^T F_k``."""
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, p, r, a
    cdef double w, wa
    for k in range(nrows):
        w = row_weight[k]
        if w == 0.0:
            continue
        for p in range(indptr[k], indptr[k + 1]):
            a = indices[p]
            wa = w * data[p]
            for r in range(indptr[k], indptr[k + 1]):
                out[a, indices[r]] += wa * data[r]
    return out_arr
