# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled forward kernels for flow attention and the softmax baseline.

Inputs are already-projected ``q`` (n x d), ``k`` (m x d), ``v`` (m x d)
float64 arrays. Mirrors ``_kernels_py`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs, sqrt

cnp.import_array()

cdef double PHI_EPS = 1e-6


cdef inline double phi(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x)) + PHI_EPS
    return log1p(exp(x)) + PHI_EPS


cdef void _phi_rows(const double[:, ::1] src, double[:, ::1] dst) nogil:
    cdef Py_ssize_t i, c
    for i in range(src.shape[0]):
        for c in range(src.shape[1]):
            dst[i, c] = phi(src[i, c])


cdef void _softmax(double[::1] x, double[::1] out) nogil:
    cdef Py_ssize_t j, m = x.shape[0]
    cdef double mx = x[0], total = 0.0
    for j in range(1, m):
        if x[j] > mx:
            mx = x[j]
    for j in range(m):
        out[j] = exp(x[j] - mx)
        total += out[j]
    for j in range(m):
        out[j] /= total


def flow_attention_factorized(q, k, v):
    """Linear-time path: column sums and one d x d summary, no n x m matrix."""
    cdef const double[:, ::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, ::1] K = np.ascontiguousarray(k, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = Q.shape[0], m = K.shape[0], d = Q.shape[1], dv = V.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double acc

    pq_arr = np.empty((n, d))
    pk_arr = np.empty((m, d))
    cdef double[:, ::1] pq = pq_arr
    cdef double[:, ::1] pk = pk_arr
    qsum_arr = np.zeros(d)
    ksum_arr = np.zeros(d)
    cdef double[::1] qsum = qsum_arr
    cdef double[::1] ksum = ksum_arr
    inc_arr = np.empty(n)
    out_arr = np.empty(m)
    comp_arr = np.empty(m)
    cdef double[::1] inc = inc_arr
    cdef double[::1] outg = out_arr
    cdef double[::1] comp = comp_arr
    summary_arr = np.zeros((d, dv))
    cdef double[:, ::1] summary = summary_arr
    res_arr = np.empty((n, dv))
    cdef double[:, ::1] res = res_arr

    with nogil:
        _phi_rows(Q, pq)
        _phi_rows(K, pk)
        for i in range(n):
            for a in range(d):
                qsum[a] += pq[i, a]
        for j in range(m):
            for a in range(d):
                ksum[a] += pk[j, a]
        for i in range(n):
            acc = 0.0
            for a in range(d):
                acc += pq[i, a] * ksum[a]
            inc[i] = acc
        for j in range(m):
            acc = 0.0
            for a in range(d):
                acc += pk[j, a] * qsum[a]
            outg[j] = acc
        _softmax(outg, comp)
        for j in range(m):
            for a in range(d):
                for b in range(dv):
                    summary[a, b] += pk[j, a] * comp[j] * V[j, b]
        for i in range(n):
            for b in range(dv):
                acc = 0.0
                for a in range(d):
                    acc += pq[i, a] * summary[a, b]
                res[i, b] = acc / inc[i]
    return res_arr, inc_arr, out_arr, comp_arr


def flow_attention_quadratic(q, k, v):
    """Reference path: every query/source pair visited explicitly."""
    cdef const double[:, ::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, ::1] K = np.ascontiguousarray(k, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = Q.shape[0], m = K.shape[0], d = Q.shape[1], dv = V.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double w

    pq_arr = np.empty((n, d))
    pk_arr = np.empty((m, d))
    cdef double[:, ::1] pq = pq_arr
    cdef double[:, ::1] pk = pk_arr
    inc_arr = np.zeros(n)
    out_arr = np.zeros(m)
    comp_arr = np.empty(m)
    cdef double[::1] inc = inc_arr
    cdef double[::1] outg = out_arr
    cdef double[::1] comp = comp_arr
    res_arr = np.zeros((n, dv))
    cdef double[:, ::1] res = res_arr

    with nogil:
        _phi_rows(Q, pq)
        _phi_rows(K, pk)
        for i in range(n):
            for j in range(m):
                w = 0.0
                for a in range(d):
                    w += pq[i, a] * pk[j, a]
                inc[i] += w
                outg[j] += w
        _softmax(outg, comp)
        for i in range(n):
            for j in range(m):
                w = 0.0
                for a in range(d):
                    w += pq[i, a] * pk[j, a]
                w = w * comp[j] / inc[i]
                for b in range(dv):
                    res[i, b] += w * V[j, b]
    return res_arr, inc_arr, out_arr, comp_arr


def softmax_attention(q, k, v):
    """Naive scaled dot-product attention; materialises each score row."""
    cdef const double[:, ::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, ::1] K = np.ascontiguousarray(k, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = Q.shape[0], m = K.shape[0], d = Q.shape[1], dv = V.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double s, scale = 1.0 / sqrt(<double>d)
    row_arr = np.empty(m)
    prob_arr = np.empty(m)
    cdef double[::1] row = row_arr
    cdef double[::1] prob = prob_arr
    res_arr = np.zeros((n, dv))
    cdef double[:, ::1] res = res_arr

    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for a in range(d):
                    s += Q[i, a] * K[j, a]
                row[j] = s * scale
            _softmax(row, prob)
            for j in range(m):
                for b in range(dv):
                    res[i, b] += prob[j] * V[j, b]
    return res_arr
