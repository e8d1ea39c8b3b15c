# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``; same signatures and semantics.

Pairs are visited once (i < j) and mirrored, so the distance matrix is exactly
symmetric and no N x N x d temporaries are allocated.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log1p, asin, fabs

cnp.import_array()

cdef double SMALL_CURVATURE = 1e-8


cdef inline double _comp_z(double[:, ::1] x, Py_ssize_t i, Py_ssize_t j, Py_ssize_t a,
                           Py_ssize_t b, long kind, double K, double* s_out) nogil:
    cdef Py_ssize_t m
    cdef double s = 0.0, t, ai = 0.0, aj = 0.0, z
    for m in range(a, b):
        t = x[i, m] - x[j, m]
        s += t * t
    s_out[0] = s
    if kind == 0:
        return 0.0
    if kind == 1:
        t = x[i, a] - x[j, a]
        z = -0.5 * K * (s - 2.0 * t * t)
        return z if z > 0.0 else 0.0
    if kind == 2:
        z = 0.5 * K * s
    else:
        for m in range(a, b):
            ai += x[i, m] * x[i, m]
            aj += x[j, m] * x[j, m]
        z = 2.0 * K * s / ((1.0 + K * ai) * (1.0 + K * aj))
        if kind == 3:
            z = -z
            return z if z > 0.0 else 0.0
    if z < 0.0:
        return 0.0
    if z > 2.0:
        return 2.0
    return z


cdef inline bint _is_flat(long kind, double K) nogil:
    return kind == 0 or ((kind == 3 or kind == 4) and fabs(K) < SMALL_CURVATURE)


cdef inline double _comp_dist(long kind, double K, double z, double s) nogil:
    if kind == 0:
        return sqrt(s)
    if (kind == 3 or kind == 4) and fabs(K) < SMALL_CURVATURE:
        return 2.0 * sqrt(s)
    if kind == 1 or kind == 3:
        return log1p(z + sqrt(z * (z + 2.0))) / sqrt(-K)
    return 2.0 * asin(sqrt(0.5 * z)) / sqrt(K)


def pairwise_forward(x, starts, stops, kinds, curv):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef long[::1] sp = np.ascontiguousarray(stops, dtype=np.int64)
    cdef long[::1] kd = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef double[::1] kv = np.ascontiguousarray(curv, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], nc = kd.shape[0]
    total = np.zeros((n, n))
    comps = np.zeros((nc, n, n))
    cdef double[:, ::1] tv = total
    cdef double[:, :, ::1] cv = comps
    cdef Py_ssize_t i, j, c
    cdef double s, z, d, acc
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for c in range(nc):
                    z = _comp_z(xv, i, j, st[c], sp[c], kd[c], kv[c], &s)
                    d = _comp_dist(kd[c], kv[c], z, s)
                    cv[c, i, j] = d
                    cv[c, j, i] = d
                    acc += d * d
                acc = sqrt(acc)
                tv[i, j] = acc
                tv[j, i] = acc
    return total, comps


def pairwise_backward(grad, x, starts, stops, kinds, curv, total, comps):
    cdef double[:, ::1] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef long[::1] sp = np.ascontiguousarray(stops, dtype=np.int64)
    cdef long[::1] kd = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef double[::1] kv = np.ascontiguousarray(curv, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(total, dtype=np.float64)
    cdef double[:, :, ::1] cv = np.ascontiguousarray(comps, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], nc = kd.shape[0]
    gx_arr = np.zeros((n, xv.shape[1]))
    gk_arr = np.zeros(nc)
    cdef double[:, ::1] gx = gx_arr
    cdef double[::1] gk = gk_arr
    cdef Py_ssize_t i, j, c, m, a, b
    cdef long kind
    cdef double gs, w, gc, s, z, d, K, r, deriv, c1, coef, ai, aj, pi, pj, sign, t, dzdk
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                gs = g[i, j] + g[j, i]
                if gs == 0.0 or tv[i, j] <= 0.0:
                    continue
                w = gs / tv[i, j]
                for c in range(nc):
                    d = cv[c, i, j]
                    gc = w * d
                    if gc == 0.0:
                        continue
                    kind = kd[c]
                    K = kv[c]
                    a = st[c]
                    b = sp[c]
                    if _is_flat(kind, K):
                        t = 1.0 if kind == 0 else 4.0
                        coef = gc * t / d
                        for m in range(a, b):
                            s = coef * (xv[i, m] - xv[j, m])
                            gx[i, m] += s
                            gx[j, m] -= s
                        continue
                    z = _comp_z(xv, i, j, a, b, kind, K, &s)
                    if kind == 1 or kind == 3:
                        deriv = 1.0 / sqrt(z * (z + 2.0)) if z > 0.0 else 0.0
                        r = sqrt(-K)
                    else:
                        deriv = 1.0 / sqrt(z * (2.0 - z)) if (z > 0.0 and z < 2.0) else 0.0
                        r = sqrt(K)
                    c1 = gc * deriv / r
                    if kind == 3 or kind == 4:
                        ai = 0.0
                        aj = 0.0
                        for m in range(a, b):
                            ai += xv[i, m] * xv[i, m]
                            aj += xv[j, m] * xv[j, m]
                        pi = 1.0 + K * ai
                        pj = 1.0 + K * aj
                        sign = -1.0 if kind == 3 else 1.0
                        coef = c1 * sign * 4.0 * K / (pi * pj)
                        for m in range(a, b):
                            t = coef * (xv[i, m] - xv[j, m])
                            gx[i, m] += t - c1 * 2.0 * K * z / pi * xv[i, m]
                            gx[j, m] += -t - c1 * 2.0 * K * z / pj * xv[j, m]
                        dzdk = z * (1.0 / K - ai / pi - aj / pj)
                    elif kind == 1:
                        coef = -K * c1
                        for m in range(a, b):
                            t = coef * (xv[i, m] - xv[j, m])
                            if m == a:
                                t = -t
                            gx[i, m] += t
                            gx[j, m] -= t
                        dzdk = z / K
                    else:
                        coef = K * c1
                        for m in range(a, b):
                            t = coef * (xv[i, m] - xv[j, m])
                            gx[i, m] += t
                            gx[j, m] -= t
                        dzdk = z / K
                    gk[c] += c1 * dzdk - gc * d / (2.0 * K)
    return gx_arr, gk_arr


def topk_rows(scores, Py_ssize_t k):
    cdef double[:, ::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0], m = sv.shape[1]
    out = np.zeros((n, k), dtype=np.int64)
    cdef long[:, ::1] ov = out
    best_arr = np.empty(k)
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, j, p, filled
    cdef double v
    with nogil:
        for i in range(n):
            filled = 0
            for j in range(m):
                v = sv[i, j]
                if filled == k and not (v > best[k - 1]):
                    continue
                p = filled if filled < k else k - 1
                while p > 0 and v > best[p - 1]:
                    best[p] = best[p - 1]
                    ov[i, p] = ov[i, p - 1]
                    p -= 1
                best[p] = v
                ov[i, p] = j
                if filled < k:
                    filled += 1
    return out
