# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same API and formulas as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, threadid
from libc.math cimport exp, log, log1p, expm1, INFINITY, isfinite
from libc.stdint cimport int64_t

cnp.import_array()

BACKEND = "cython"

cdef double LN2 = 0.6931471805599453


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _log1mexp(double d) noexcept nogil:
    if d > -LN2:
        return log(-expm1(d))
    return log1p(-exp(d))


cdef inline double _logit_logpmf(double eta, int64_t r, const double* theta, int64_t levels) noexcept nogil:
    cdef double u, v
    if r == 1:
        v = eta + theta[0]
        return -_softplus(v)
    if r == levels:
        u = eta + theta[levels - 2]
        return -_softplus(-u)
    u = eta + theta[r - 2]
    v = eta + theta[r - 1]
    return -_softplus(-u) - _softplus(v) + _log1mexp(v - u)


def logit_logpmf(eta, rating, theta):
    cdef const double[::1] e = np.ascontiguousarray(eta, dtype=np.float64).ravel()
    cdef const int64_t[::1] r = np.ascontiguousarray(rating, dtype=np.int64).ravel()
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], k
    cdef int64_t levels = th.shape[0] + 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(n):
            o[k] = _logit_logpmf(e[k], r[k], &th[0], levels)
    return out.reshape(np.shape(eta))


cdef inline void _fill_weights(
    const int64_t* ca, const int64_t* cb, const int64_t* cg, const double* cc,
    Py_ssize_t start, Py_ssize_t stop, int64_t rating,
    double lb, double ld, double ln, double bias, double epsilon,
    const double* theta, int64_t levels, double* buf,
) noexcept nogil:
    cdef Py_ssize_t k
    cdef int64_t a, b, g
    cdef double x, lw
    for k in range(start, stop):
        a = ca[k]
        b = cb[k]
        g = cg[k]
        x = (a + bias * g) / <double>(a + b + g)
        lw = _logit_logpmf(epsilon * x, rating, theta, levels)
        lw = lw + cc[k]
        if a > 0:
            lw = lw + a * lb
        if b > 0:
            lw = lw + b * ld
        if g > 0:
            lw = lw + g * ln
        buf[k - start] = lw


def edge_log_weights(
    comp_alpha, comp_beta, comp_gamma, comp_log_coef, offsets,
    int64_t lam_lo, int64_t lam_hi, int64_t rating, log_behavior,
    double bias, double epsilon, theta,
):
    cdef const int64_t[::1] ca = np.ascontiguousarray(comp_alpha, dtype=np.int64)
    cdef const int64_t[::1] cb = np.ascontiguousarray(comp_beta, dtype=np.int64)
    cdef const int64_t[::1] cg = np.ascontiguousarray(comp_gamma, dtype=np.int64)
    cdef const double[::1] cc = np.ascontiguousarray(comp_log_coef, dtype=np.float64)
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[::1] lbv = np.ascontiguousarray(log_behavior, dtype=np.float64)
    cdef Py_ssize_t start = off[lam_lo], stop = off[lam_hi + 1]
    out = np.empty(stop - start, dtype=np.float64)
    cdef double[::1] o = out
    _fill_weights(&ca[0], &cb[0], &cg[0], &cc[0], start, stop, rating,
                  lbv[0], lbv[1], lbv[2], bias, epsilon, &th[0], th.shape[0] + 1, &o[0])
    return out


def sample_opinions(
    comp_alpha, comp_beta, comp_gamma, comp_log_coef, offsets,
    lam_lo, lam_hi, trustors, trustees, ratings,
    log_behaviors, biases, double epsilon, theta, uniforms, out, int num_threads=1,
):
    cdef const int64_t[::1] ca = np.ascontiguousarray(comp_alpha, dtype=np.int64)
    cdef const int64_t[::1] cb = np.ascontiguousarray(comp_beta, dtype=np.int64)
    cdef const int64_t[::1] cg = np.ascontiguousarray(comp_gamma, dtype=np.int64)
    cdef const double[::1] cc = np.ascontiguousarray(comp_log_coef, dtype=np.float64)
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const int64_t[::1] lo = np.ascontiguousarray(lam_lo, dtype=np.int64)
    cdef const int64_t[::1] hi = np.ascontiguousarray(lam_hi, dtype=np.int64)
    cdef const int64_t[::1] ti = np.ascontiguousarray(trustors, dtype=np.int64)
    cdef const int64_t[::1] tj = np.ascontiguousarray(trustees, dtype=np.int64)
    cdef const int64_t[::1] rr = np.ascontiguousarray(ratings, dtype=np.int64)
    cdef const double[:, ::1] lb = np.ascontiguousarray(log_behaviors, dtype=np.float64)
    cdef const double[::1] bs = np.ascontiguousarray(biases, dtype=np.float64)
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef int64_t[:, :] res = out
    cdef Py_ssize_t n_edges = rr.shape[0], e, k, width, maxw = 0, pick
    cdef int64_t levels = th.shape[0] + 1
    cdef int nthreads = num_threads if num_threads > 0 else 1
    cdef double top, total, target, acc
    cdef double* buf
    status = np.zeros(n_edges, dtype=np.int8)
    cdef cnp.int8_t[::1] st = status

    for e in range(n_edges):
        width = off[hi[e] + 1] - off[lo[e]]
        if width > maxw:
            maxw = width
    if n_edges == 0:
        return -1
    scratch = np.empty((nthreads, maxw), dtype=np.float64)
    cdef double[:, ::1] sc = scratch

    for e in prange(n_edges, nogil=True, num_threads=nthreads, schedule="static"):
        buf = &sc[threadid(), 0]
        width = off[hi[e] + 1] - off[lo[e]]
        _fill_weights(&ca[0], &cb[0], &cg[0], &cc[0], off[lo[e]], off[hi[e] + 1], rr[e],
                      lb[tj[e], 0], lb[tj[e], 1], lb[tj[e], 2], bs[ti[e]], epsilon,
                      &th[0], levels, buf)
        top = -INFINITY
        for k in range(width):
            if buf[k] > top:
                top = buf[k]
        if not isfinite(top):
            st[e] = 1
            continue
        total = 0.0
        for k in range(width):
            buf[k] = exp(buf[k] - top)
            total = total + buf[k]
        target = uu[e] * total
        acc = 0.0
        pick = -1
        for k in range(width):
            acc = acc + buf[k]
            if acc > target:
                pick = k
                break
        if pick < 0:
            # u * total rounded up to total: take the last positive-weight entry
            pick = width - 1
            while buf[pick] <= 0.0:
                pick = pick - 1
        pick = pick + off[lo[e]]
        res[e, 0] = ca[pick]
        res[e, 1] = cb[pick]
        res[e, 2] = cg[pick]
    bad = np.flatnonzero(status)
    return int(bad[0]) if bad.size else -1
