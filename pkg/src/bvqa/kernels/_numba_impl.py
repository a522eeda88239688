"""Numba-compiled implementations of the hot kernels.

Kept arithmetically identical to ``_numpy_impl`` (same formulas, same
evaluation order) so the two paths agree to floating-point determinism.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _resize_bilinear_f64(src, out_h, out_w):
    in_h, in_w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    sy = in_h / out_h
    sx = in_w / out_w
    for oy in range(out_h):
        y = (oy + 0.5) * sy - 0.5
        if y < 0.0:
            y = 0.0
        if y > in_h - 1.0:
            y = in_h - 1.0
        y0 = int(np.floor(y))
        y1 = y0 + 1
        if y1 > in_h - 1:
            y1 = in_h - 1
        fy = y - y0
        for ox in range(out_w):
            x = (ox + 0.5) * sx - 0.5
            if x < 0.0:
                x = 0.0
            if x > in_w - 1.0:
                x = in_w - 1.0
            x0 = int(np.floor(x))
            x1 = x0 + 1
            if x1 > in_w - 1:
                x1 = in_w - 1
            fx = x - x0
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[oy, ox] = top * (1.0 - fy) + bot * fy
    return out


def resize_bilinear(src, out_h, out_w):
    return _resize_bilinear_f64(np.ascontiguousarray(src, dtype=np.float64), out_h, out_w)


@njit(cache=True)
def _reflect(i, n):
    # scipy "reflect" convention: (d c b a | a b c d)
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - 1 - i
    return i


@njit(cache=True)
def _sep_filter(src, taps):
    h, w = src.shape
    k = taps.shape[0]
    half = k // 2
    tmp = np.empty((h, w), dtype=np.float64)
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for t in range(k):
                ii = _reflect(i + t - half, h)
                acc += taps[t] * src[ii, j]
            tmp[i, j] = acc
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for t in range(k):
                jj = _reflect(j + t - half, w)
                acc += taps[t] * tmp[i, jj]
            out[i, j] = acc
    return out


def separable_filter(src, taps):
    return _sep_filter(
        np.ascontiguousarray(src, dtype=np.float64),
        np.ascontiguousarray(taps, dtype=np.float64),
    )


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = y.shape[0]
    beta = np.zeros(n)
    g = -y.copy()

    it = 0
    converged = False
    while it < max_iter:
        lo = np.inf
        hi = -np.inf
        i = -1
        j = -1
        for m in range(n):
            gu = g[m] + (eps if beta[m] >= 0.0 else -eps)
            gd = g[m] + (-eps if beta[m] <= 0.0 else eps)
            if beta[m] < C and gu < lo:
                lo = gu
                i = m
            if beta[m] > -C and gd > hi:
                hi = gd
                j = m
        viol = hi - lo
        if viol < tol:
            converged = True
            break

        denom = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if denom < 1e-12:
            denom = 1e-12
        t = viol / denom
        if t > C - beta[i]:
            t = C - beta[i]
        if t > beta[j] + C:
            t = beta[j] + C
        if beta[i] < 0.0 and t > -beta[i]:
            t = -beta[i]
        if beta[j] > 0.0 and t > beta[j]:
            t = beta[j]
        beta[i] += t
        beta[j] -= t
        for m in range(n):
            g[m] += t * (K[m, i] - K[m, j])
        it += 1

    lo = np.inf
    hi = -np.inf
    for m in range(n):
        gu = g[m] + (eps if beta[m] >= 0.0 else -eps)
        gd = g[m] + (-eps if beta[m] <= 0.0 else eps)
        if beta[m] < C and gu < lo:
            lo = gu
        if beta[m] > -C and gd > hi:
            hi = gd
    bias = -0.5 * (lo + hi)
    return beta, bias, it, converged


def smo_solve(K, y, C, eps, tol, max_iter):
    return _smo(
        np.ascontiguousarray(K, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        float(C),
        float(eps),
        float(tol),
        int(max_iter),
    )
