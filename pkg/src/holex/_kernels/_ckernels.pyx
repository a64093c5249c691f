# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels: scores, gradient accumulation, AdaGrad update.

Parameter layout matches the Python fallback: HolE rows have width K,
ComplEx rows have width 2K with real parts first.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


cdef inline double _corr_at(const double* a, const double* b, Py_ssize_t k, Py_ssize_t K) noexcept nogil:
    """sum_i a[i] * b[(i + k) mod K], as two contiguous runs."""
    cdef Py_ssize_t i
    cdef double acc = 0.0
    cdef const double* bk = b + k
    for i in range(K - k):
        acc += a[i] * bk[i]
    bk = b + k - K
    for i in range(K - k, K):
        acc += a[i] * bk[i]
    return acc


cdef inline double _conv_at(const double* a, const double* b, Py_ssize_t j, Py_ssize_t K) noexcept nogil:
    """sum_k a[k] * b[(j - k) mod K], as two contiguous runs."""
    cdef Py_ssize_t k
    cdef double acc = 0.0
    for k in range(j + 1):
        acc += a[k] * b[j - k]
    for k in range(j + 1, K):
        acc += a[k] * b[j - k + K]
    return acc


cdef inline double _hole_score(const double[:, ::1] E, const double[:, ::1] R,
                               Py_ssize_t p, Py_ssize_t s, Py_ssize_t o, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0
    cdef const double* es = &E[s, 0]
    cdef const double* eo = &E[o, 0]
    cdef const double* r = &R[p, 0]
    for k in range(K):
        acc += r[k] * _corr_at(es, eo, k, K)
    return acc


cdef inline double _complex_score(const double[:, ::1] E, const double[:, ::1] R,
                                  Py_ssize_t p, Py_ssize_t s, Py_ssize_t o, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0, rr, ri, sr, si
    for j in range(K):
        rr = R[p, j]
        ri = R[p, K + j]
        sr = E[s, j]
        si = E[s, K + j]
        acc += (rr * sr - ri * si) * E[o, j] + (rr * si + ri * sr) * E[o, K + j]
    return acc


def score_batch(int kind, const double[:, ::1] E, const double[:, ::1] R,
                const cnp.int64_t[::1] p, const cnp.int64_t[::1] s, const cnp.int64_t[::1] o):
    cdef Py_ssize_t B = p.shape[0], b
    cdef Py_ssize_t K = R.shape[1] if kind == 0 else R.shape[1] // 2
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        if kind == 0:
            for b in range(B):
                res[b] = _hole_score(E, R, p[b], s[b], o[b], K)
        else:
            for b in range(B):
                res[b] = _complex_score(E, R, p[b], s[b], o[b], K)
    return out


def grad_batch(int kind, const double[:, ::1] E, const double[:, ::1] R,
               const cnp.int64_t[::1] p, const cnp.int64_t[::1] s, const cnp.int64_t[::1] o,
               const double[::1] w,
               const cnp.int64_t[::1] p_slot, const cnp.int64_t[::1] s_slot, const cnp.int64_t[::1] o_slot,
               double[:, ::1] gE, double[:, ::1] gR):
    """Add ``w[b] * d(score_b)/d(theta)`` into the compact buffers gE, gR."""
    cdef Py_ssize_t B = p.shape[0], b, i, k, j
    cdef Py_ssize_t K = R.shape[1] if kind == 0 else R.shape[1] // 2
    cdef Py_ssize_t pp, ss, oo, ps, es, eo
    cdef double wb, rr, ri, sr, si, orr, oi
    cdef const double* es_p
    cdef const double* eo_p
    cdef const double* r_p
    with nogil:
        for b in range(B):
            wb = w[b]
            if wb == 0.0:
                continue
            pp = p[b]; ss = s[b]; oo = o[b]
            ps = p_slot[b]; es = s_slot[b]; eo = o_slot[b]
            if kind == 0:
                es_p = &E[ss, 0]
                eo_p = &E[oo, 0]
                r_p = &R[pp, 0]
                for k in range(K):
                    gR[ps, k] += wb * _corr_at(es_p, eo_p, k, K)
                for i in range(K):
                    gE[es, i] += wb * _corr_at(r_p, eo_p, i, K)
                for j in range(K):
                    gE[eo, j] += wb * _conv_at(r_p, es_p, j, K)
            else:
                for j in range(K):
                    rr = R[pp, j]; ri = R[pp, K + j]
                    sr = E[ss, j]; si = E[ss, K + j]
                    orr = E[oo, j]; oi = E[oo, K + j]
                    gR[ps, j] += wb * (sr * orr + si * oi)
                    gR[ps, K + j] += wb * (sr * oi - si * orr)
                    gE[es, j] += wb * (rr * orr + ri * oi)
                    gE[es, K + j] += wb * (rr * oi - ri * orr)
                    gE[eo, j] += wb * (rr * sr - ri * si)
                    gE[eo, K + j] += wb * (rr * si + ri * sr)


def adagrad_update(double[:, ::1] param, double[:, ::1] acc, const cnp.int64_t[::1] rows,
                   const double[:, ::1] grad, double lr, double eps):
    """In-place AdaGrad on the listed (unique) rows."""
    cdef Py_ssize_t n = rows.shape[0], D = param.shape[1], a, d, r
    cdef double g
    with nogil:
        for a in range(n):
            r = rows[a]
            for d in range(D):
                g = grad[a, d]
                acc[r, d] += g * g
                param[r, d] -= lr * g / (sqrt(acc[r, d]) + eps)
