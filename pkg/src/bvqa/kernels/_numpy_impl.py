"""Pure-numpy reference implementations of the hot kernels."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d


def resize_bilinear(src, out_h, out_w):
    """Bilinear resample with half-pixel centers (no corner alignment).

    Identity-preserving: when the output dims equal the input dims the
    result is bitwise equal to the input.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    in_h, in_w = src.shape
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    top = a * (1.0 - fx) + b * fx
    bot = c * (1.0 - fx) + d * fx
    return top * (1.0 - fy) + bot * fy


def separable_filter(src, taps):
    """Separable 2-D correlation with symmetric (reflect) borders."""
    src = np.asarray(src, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    out = correlate1d(src, taps, axis=0, mode="reflect")
    return correlate1d(out, taps, axis=1, mode="reflect")


def smo_solve(K, y, C, eps, tol, max_iter):
    """Epsilon-SVR dual solver, maximal-KKT-violating-pair SMO.

    Works on the condensed dual variable ``beta = alpha - alpha*`` in
    [-C, C] with the equality constraint sum(beta) = 0 maintained exactly
    by pairwise updates. Steps are clipped at the beta = 0 kink where the
    epsilon term changes its subgradient.

    Returns (beta, bias, iterations, converged).
    """
    n = y.shape[0]
    beta = np.zeros(n)
    g = -y.astype(np.float64).copy()

    it = 0
    converged = False
    while it < max_iter:
        g_up = g + np.where(beta >= 0.0, eps, -eps)
        g_dn = g + np.where(beta <= 0.0, -eps, eps)
        up_mask = beta < C
        dn_mask = beta > -C

        up_vals = np.where(up_mask, g_up, np.inf)
        dn_vals = np.where(dn_mask, g_dn, -np.inf)
        i = int(np.argmin(up_vals))
        j = int(np.argmax(dn_vals))
        viol = dn_vals[j] - up_vals[i]
        if viol < tol:
            converged = True
            break

        denom = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if denom < 1e-12:
            denom = 1e-12
        t = viol / denom
        t = min(t, C - beta[i], beta[j] + C)
        if beta[i] < 0.0:
            t = min(t, -beta[i])
        if beta[j] > 0.0:
            t = min(t, beta[j])
        beta[i] += t
        beta[j] -= t
        g += t * (K[:, i] - K[:, j])
        it += 1

    g_up = g + np.where(beta >= 0.0, eps, -eps)
    g_dn = g + np.where(beta <= 0.0, -eps, eps)
    lo = np.min(np.where(beta < C, g_up, np.inf))
    hi = np.max(np.where(beta > -C, g_dn, -np.inf))
    bias = -0.5 * (lo + hi)
    return beta, bias, it, converged
