# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Hot solver loops over dense GLM data (squared / logistic losses).

These mirror the pure-Python engines step for step: same splitmix64 stream,
same inverse-CDF lookup, same update order.  Only floating-point rounding
of the dot products may differ from the BLAS-backed fallback.
"""

from libc.math cimport exp

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline u64 _next(u64 *state) nogil:
    state[0] += GOLDEN
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(u64 *state) nogil:
    return <double>(_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline Py_ssize_t _pick(double[::1] cum, double u) nogil:
    # smallest index with cum[idx] > u (matches bisect_right)
    cdef Py_ssize_t lo = 0, hi = cum.shape[0] - 1, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline double _dot(double[:, ::1] A, Py_ssize_t i, double[::1] x) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(x.shape[0]):
        acc += A[i, j] * x[j]
    return acc


cdef inline double _hat_coef(int kind, double dot, double b, double w, double inv_m) nogil:
    # derivative scale of the data term; the evenly split ridge is excluded
    if kind == 0:
        return 2.0 * w * inv_m * (dot - b)
    return -w * inv_m * b / (1.0 + exp(b * dot))


def ssnm_iters(
    int kind,
    double[:, ::1] A,
    double[::1] bvec,
    double[::1] w,
    double[::1] x,
    double[:, ::1] phi,
    double[:, ::1] G,
    double[::1] s,
    double[::1] cum,
    double[::1] pi,
    double[::1] tau,
    double eta,
    double mu_total,
    long long[::1] K,
    u64 state,
    Py_ssize_t n_iters,
    Py_ssize_t start_iter,
):
    """Advance the anchor-based loop n_iters steps; returns the rng state."""
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef double inv_m = 1.0 / <double>m
    cdef double denom = 1.0 + eta * mu_total
    cdef Py_ssize_t it, i, jdx, j
    cdef double ti, tj, dot, coef, gy, gt, inv_pi, cj
    cdef double[::1] ybuf = np.empty(n)
    cdef u64 st = state
    for it in range(n_iters):
        i = _pick(cum, _uniform(&st))
        ti = tau[i]
        for j in range(n):
            ybuf[j] = ti * x[j] + (1.0 - ti) * phi[i, j]
        dot = _dot(A, i, ybuf)
        coef = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
        inv_pi = 1.0 / pi[i]
        for j in range(n):
            gy = coef * A[i, j]
            gt = (gy - G[i, j]) * inv_pi + s[j]
            x[j] = (x[j] - eta * gt) / denom
        K[i] += 1
        jdx = _pick(cum, _uniform(&st))
        tj = tau[jdx]
        for j in range(n):
            phi[jdx, j] = tj * x[j] + (1.0 - tj) * phi[jdx, j]
        dot = _dot(A, jdx, phi[jdx])
        cj = _hat_coef(kind, dot, bvec[jdx], w[jdx], inv_m)
        for j in range(n):
            coef = cj * A[jdx, j]
            s[j] += coef - G[jdx, j]
            G[jdx, j] = coef
        K[jdx] += 1
        if (start_iter + it + 1) % m == 0:
            for j in range(n):
                s[j] = 0.0
            for i in range(m):
                for j in range(n):
                    s[j] += G[i, j]
    return st


def saga_iters(
    int kind,
    double[:, ::1] A,
    double[::1] bvec,
    double[::1] w,
    double ridge,
    double[::1] x,
    double[:, ::1] table,
    double[::1] tsum,
    double[::1] cum,
    double step,
    long long[::1] K,
    u64 state,
    Py_ssize_t n_iters,
    Py_ssize_t start_iter,
):
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef double inv_m = 1.0 / <double>m
    cdef double rr = ridge * inv_m
    cdef double scale = step * inv_m
    cdef Py_ssize_t it, i, j
    cdef double dot, coef, g, direction
    cdef double[::1] gbuf = np.empty(n)
    cdef u64 st = state
    for it in range(n_iters):
        i = _pick(cum, _uniform(&st))
        dot = _dot(A, i, x)
        coef = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
        for j in range(n):
            gbuf[j] = coef * A[i, j] + rr * x[j]
        for j in range(n):
            direction = <double>m * (gbuf[j] - table[i, j]) + tsum[j]
            x[j] = x[j] - scale * direction
        for j in range(n):
            tsum[j] += gbuf[j] - table[i, j]
            table[i, j] = gbuf[j]
        K[i] += 1
        if (start_iter + it + 1) % m == 0:
            for j in range(n):
                tsum[j] = 0.0
            for i in range(m):
                for j in range(n):
                    tsum[j] += table[i, j]
    return st


def svrg_iters(
    int kind,
    double[:, ::1] A,
    double[::1] bvec,
    double[::1] w,
    double ridge,
    double[::1] x,
    double[::1] snapshot,
    double[:, ::1] table,
    double[::1] snap_grad,
    double[::1] cum,
    double step,
    long long[::1] K,
    u64 state,
    Py_ssize_t n_iters,
    Py_ssize_t start_iter,
    Py_ssize_t epoch_len,
):
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef double inv_m = 1.0 / <double>m
    cdef double rr = ridge * inv_m
    cdef double scale = step * inv_m
    cdef Py_ssize_t it, i, j
    cdef double dot, coef, g, direction
    cdef u64 st = state
    for it in range(n_iters):
        i = _pick(cum, _uniform(&st))
        dot = _dot(A, i, x)
        coef = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
        for j in range(n):
            g = coef * A[i, j] + rr * x[j]
            direction = <double>m * (g - table[i, j]) + snap_grad[j]
            x[j] = x[j] - scale * direction
        K[i] += 1
        if (start_iter + it + 1) % epoch_len == 0:
            for j in range(n):
                snapshot[j] = x[j]
                snap_grad[j] = 0.0
            for i in range(m):
                dot = _dot(A, i, snapshot)
                coef = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
                for j in range(n):
                    table[i, j] = coef * A[i, j] + rr * snapshot[j]
                    snap_grad[j] += table[i, j]
                K[i] += 1
    return st


def katyusha_iters(
    int kind,
    double[:, ::1] A,
    double[::1] bvec,
    double[::1] w,
    double[::1] y,
    double[::1] z,
    double[::1] x_tilde,
    double[::1] ctab,
    double[::1] S,
    double[::1] y_accum,
    double[::1] weights,
    double weight_sum,
    double[::1] cum,
    double[::1] pi,
    double tau1,
    double tau2,
    double alpha,
    double sigma,
    double L3,
    long long[::1] K,
    u64 state,
    Py_ssize_t n_iters,
    Py_ssize_t epoch_pos_in,
):
    """Advance the three-point-coupling loop; returns (rng state, epoch_pos)."""
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef double inv_m = 1.0 / <double>m
    cdef double tau3 = 1.0 - tau1 - tau2
    cdef double zden = 1.0 + alpha * sigma
    cdef double yden = L3 + sigma
    cdef Py_ssize_t it, i, j
    cdef Py_ssize_t pos = epoch_pos_in
    cdef Py_ssize_t epoch_len = weights.shape[0]
    cdef double dot, coef, gt, inv_pi, wgt
    cdef double[::1] xbuf = np.empty(n)
    cdef u64 st = state
    for it in range(n_iters):
        if pos == 0:
            for j in range(n):
                S[j] = 0.0
                y_accum[j] = 0.0
            for i in range(m):
                dot = _dot(A, i, x_tilde)
                ctab[i] = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
                for j in range(n):
                    S[j] += ctab[i] * A[i, j]
                K[i] += 1
        for j in range(n):
            xbuf[j] = tau1 * z[j] + tau2 * x_tilde[j] + tau3 * y[j]
        i = _pick(cum, _uniform(&st))
        dot = _dot(A, i, xbuf)
        coef = _hat_coef(kind, dot, bvec[i], w[i], inv_m)
        inv_pi = 1.0 / pi[i]
        wgt = weights[pos]
        for j in range(n):
            gt = S[j] + (coef - ctab[i]) * inv_pi * A[i, j]
            z[j] = (z[j] - alpha * gt) / zden
            y[j] = (L3 * xbuf[j] - gt) / yden
            y_accum[j] += wgt * y[j]
        K[i] += 1
        pos += 1
        if pos == epoch_len:
            for j in range(n):
                x_tilde[j] = y_accum[j] / weight_sum
            pos = 0
    return st, pos
