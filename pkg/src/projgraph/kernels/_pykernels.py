"""Vectorised numpy implementation of the hot kernels.

Kind codes: 0=E, 1=H, 2=S, 3=P, 4=D. Points are rows of one concatenated
ambient matrix; component ``c`` occupies columns ``starts[c]:stops[c]``.
"""
import numpy as np

SMALL_CURVATURE = 1e-8


def _acosh1p(z):
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def _acos1m(z):
    return 2.0 * np.arcsin(np.sqrt(0.5 * z))


def _component(xs, kind, K):
    """Return (distance, z, sq_norms, diff) for one block; z is None where unused."""
    diff = xs[:, None, :] - xs[None, :, :]
    s = np.einsum("ijk,ijk->ij", diff, diff)
    a = np.einsum("ik,ik->i", xs, xs)
    if kind == 0:
        return np.sqrt(s), None, a, diff
    if kind in (3, 4) and abs(K) < SMALL_CURVATURE:
        return 2.0 * np.sqrt(s), None, a, diff
    if kind in (3, 4):
        p = 1.0 + K * a
        sign = -1.0 if kind == 3 else 1.0
        z = (2.0 * sign) * K * s / (p[:, None] * p[None, :])
    elif kind == 1:
        lor = s - 2.0 * diff[..., 0] * diff[..., 0]
        z = (-0.5 * K) * lor
    else:
        z = (0.5 * K) * s
    if kind in (1, 3):
        z = np.maximum(z, 0.0)
        d = _acosh1p(z) / np.sqrt(-K)
    else:
        z = np.clip(z, 0.0, 2.0)
        d = _acos1m(z) / np.sqrt(K)
    return d, z, a, diff


def pairwise_forward(x, starts, stops, kinds, curv):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    comps = np.empty((len(kinds), n, n))
    for c, (a, b, kind, K) in enumerate(zip(starts, stops, kinds, curv)):
        comps[c] = _component(x[:, a:b], int(kind), float(K))[0]
    total = np.sqrt(np.sum(comps * comps, axis=0))
    return total, comps


def _pull(coef, xs):
    # sum_j coef_ij (x_i - x_j)
    return coef.sum(axis=1)[:, None] * xs - coef @ xs


def pairwise_backward(grad, x, starts, stops, kinds, curv, total, comps):
    x = np.ascontiguousarray(x, dtype=np.float64)
    gs = np.asarray(grad, dtype=np.float64)
    gs = gs + gs.T
    np.fill_diagonal(gs, 0.0)
    positive = total > 0
    w = np.where(positive, gs / np.where(positive, total, 1.0), 0.0)
    gx = np.zeros_like(x)
    gk = np.zeros(len(kinds))
    for c, (a, b, kind, K) in enumerate(zip(starts, stops, kinds, curv)):
        kind, K = int(kind), float(K)
        xs = x[:, a:b]
        d, z, sq, diff = _component(xs, kind, K)
        gc = w * comps[c]
        flat = kind == 0 or (kind in (3, 4) and abs(K) < SMALL_CURVATURE)
        if flat:
            scale = 1.0 if kind == 0 else 2.0
            ok = d > 0
            coef = np.where(ok, gc * scale * scale / np.where(ok, d, 1.0), 0.0)
            gx[:, a:b] += _pull(coef, xs)
            continue
        if kind in (1, 3):
            ok = z > 0
            deriv = np.where(ok, 1.0 / np.sqrt(np.where(ok, z * (z + 2.0), 1.0)), 0.0)
            r = np.sqrt(-K)
        else:
            ok = (z > 0) & (z < 2)
            deriv = np.where(ok, 1.0 / np.sqrt(np.where(ok, z * (2.0 - z), 1.0)), 0.0)
            r = np.sqrt(K)
        c1 = gc * deriv / r
        if kind in (3, 4):
            p = 1.0 + K * sq
            sign = -1.0 if kind == 3 else 1.0
            q = c1 * (sign * 4.0 * K) / (p[:, None] * p[None, :])
            rr = c1 * (2.0 * K) * z / p[:, None]
            gx[:, a:b] += _pull(q, xs) - rr.sum(axis=1)[:, None] * xs
            dz_dk = z * (1.0 / K - sq[:, None] / p[:, None] - sq[None, :] / p[None, :])
        elif kind == 1:
            g = (-K) * _pull(c1, xs)
            g[:, 0] = -g[:, 0]
            gx[:, a:b] += g
            dz_dk = z / K
        else:
            gx[:, a:b] += K * _pull(c1, xs)
            dz_dk = z / K
        dk = c1 * dz_dk - gc * d / (2.0 * K)
        gk[c] = 0.5 * np.sum(dk)
    return gx, gk


def topk_rows(scores, k):
    """Indices of the ``k`` largest entries per row, largest first, ties to the lower index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k], dtype=np.int64)
