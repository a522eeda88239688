"""Correlation / error metrics and the four-parameter logistic mapping.

SRCC is Pearson over average ranks, KRCC is tie-corrected Kendall tau-b.
PLCC and RMSE are plain functions here; the evaluation harness applies
the logistic mapping to predictions before computing them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Raised for degenerate metric inputs (constant or mismatched)."""


def _check_pair(a, b, need_variation=False):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise MetricError("inputs must be equal-length with at least 2 items")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MetricError("non-finite metric inputs")
    if need_variation and (np.ptp(a) == 0.0 or np.ptp(b) == 0.0):
        raise MetricError("correlation undefined for constant input")
    return a, b


def rankdata_average(x: np.ndarray) -> np.ndarray:
    """Average (fractional) ranks, 1-based, ties share their mean rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def plcc(a, b) -> float:
    a, b = _check_pair(a, b, need_variation=True)
    da = a - a.mean()
    db = b - b.mean()
    return float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))


def srcc(a, b) -> float:
    a, b = _check_pair(a, b, need_variation=True)
    return plcc(rankdata_average(a), rankdata_average(b))


def krcc(a, b) -> float:
    """Kendall tau-b via pairwise sign comparison (tie-corrected)."""
    a, b = _check_pair(a, b, need_variation=True)
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    iu = np.triu_indices(a.size, k=1)
    sa = da[iu]
    sb = db[iu]
    concordance = float(np.sum(sa * sb))
    n0 = sa.size
    t_a = float(np.sum(sa == 0))
    t_b = float(np.sum(sb == 0))
    denom = np.sqrt((n0 - t_a) * (n0 - t_b))
    if denom == 0.0:
        raise MetricError("tau-b undefined: all pairs tied")
    return concordance / denom


def rmse(a, b) -> float:
    a, b = _check_pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class LogisticParams:
    beta1: float
    beta2: float
    beta3: float
    beta4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta3, self.beta4])


def logistic_apply(params: LogisticParams, x) -> np.ndarray:
    """f(x) = beta2 + (beta1 - beta2) / (1 + exp(-(x - beta3) / |beta4|))."""
    x = np.asarray(x, dtype=np.float64)
    z = np.clip((x - params.beta3) / abs(params.beta4), -500.0, 500.0)
    return params.beta2 + (params.beta1 - params.beta2) / (1.0 + np.exp(-z))


def _residuals_jacobian(beta: np.ndarray, x: np.ndarray, y: np.ndarray):
    b1, b2, b3, b4 = beta
    ab4 = abs(b4)
    z = np.clip((x - b3) / ab4, -500.0, 500.0)
    s = 1.0 / (1.0 + np.exp(-z))
    f = b2 + (b1 - b2) * s
    r = f - y
    sp = s * (1.0 - s)
    jac = np.empty((x.size, 4))
    jac[:, 0] = s
    jac[:, 1] = 1.0 - s
    jac[:, 2] = -(b1 - b2) * sp / ab4
    jac[:, 3] = -(b1 - b2) * sp * (x - b3) * np.sign(b4) / (b4 * b4)
    return r, jac


def logistic_fit(x, y, max_iter: int = 2000, rel_tol: float = 1e-10) -> LogisticParams:
    """Fit the four-parameter logistic by damped (Levenberg) least squares.

    Init: beta1 = max(y), beta2 = min(y), beta3 = mean(x), beta4 = std(x).
    Converges when the relative SSE change drops below ``rel_tol``.
    """
    x, y = _check_pair(x, y)
    if x.size < 5:
        raise MetricError("need at least 5 points")
    if np.ptp(y) == 0.0:
        raise MetricError("constant target")
    beta = np.array([y.max(), y.min(), x.mean(), max(x.std(), 1e-6)])
    lam = 1e-3
    r, jac = _residuals_jacobian(beta, x, y)
    sse = float(r @ r)
    for _ in range(max_iter):
        jtj = jac.T @ jac
        jtr = jac.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-12), jtr)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        cand = beta - step
        if cand[3] == 0.0:
            cand[3] = 1e-12
        r_new, jac_new = _residuals_jacobian(cand, x, y)
        sse_new = float(r_new @ r_new)
        if sse_new < sse:
            improved = (sse - sse_new) / max(sse, 1e-300)
            beta, r, jac, sse = cand, r_new, jac_new, sse_new
            lam = max(lam * 0.3, 1e-12)
            if improved < rel_tol:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    return LogisticParams(*beta)
