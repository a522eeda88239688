"""Epsilon-SVR quality predictor: scaling, SMO training, grid search.

The dual is solved by a maximal-KKT-violating-pair SMO (see
``bvqa.kernels``); shrinking is disabled so training is deterministic
given the data order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import smo_solve
from .metrics import MetricError, srcc

KKT_TOL = 1e-3
MAX_SMO_ITER = 1_000_000

DEFAULT_C_GRID = tuple(2.0**p for p in range(-6, 11, 2))
DEFAULT_GAMMA_GRID = tuple(2.0**p for p in range(-8, 3, 2))
DEFAULT_EPSILON = 0.1

MODEL_MAGIC = b"BVQM"
MODEL_VERSION = 1


class TrainingError(ValueError):
    """Raised for empty, mismatched, or non-finite training data."""


@dataclass(frozen=True)
class Scaler:
    """Per-dimension min-max scaler fitted on training data only."""

    min: np.ndarray
    max: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = self.max - self.min
        safe = np.where(span > 0.0, span, 1.0)
        out = (x - self.min) / safe
        return np.where(span > 0.0, out, 0.0)


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("empty feature matrix")
    return Scaler(min=X.min(axis=0), max=X.max(axis=0))


@dataclass(frozen=True)
class HyperGrid:
    c_values: tuple[float, ...] = DEFAULT_C_GRID
    gamma_values: tuple[float, ...] = DEFAULT_GAMMA_GRID

    def __post_init__(self):
        if not self.c_values or not self.gamma_values:
            raise ValueError("hyperparameter grid must be non-empty")


@dataclass(frozen=True)
class SvrModel:
    gamma: float
    c: float
    epsilon: float
    support_vectors: np.ndarray  # scaled rows
    dual_coefs: np.ndarray
    bias: float
    scaler: Scaler

    def __post_init__(self):
        assert self.support_vectors.shape[0] == self.dual_coefs.shape[0]


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def train_svr(X, y, c: float, gamma: float, epsilon: float = DEFAULT_EPSILON,
              scaler: Scaler | None = None) -> SvrModel:
    """Train epsilon-SVR on raw features; scaling is fitted here unless given."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise TrainingError("need a feature matrix and targets with >= 2 aligned rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("non-finite training data")
    if scaler is None:
        scaler = fit_scaler(X)
    Xs = scaler.apply(X)
    K = rbf_kernel(Xs, Xs, gamma)
    beta, bias, _iters, _converged = smo_solve(K, y, c, epsilon, KKT_TOL, MAX_SMO_ITER)
    sv_mask = beta != 0.0
    if not np.any(sv_mask):
        sv_mask = np.zeros_like(sv_mask)
        sv_mask[0] = True  # keep the model well-formed for constant targets
    return SvrModel(
        gamma=float(gamma),
        c=float(c),
        epsilon=float(epsilon),
        support_vectors=np.ascontiguousarray(Xs[sv_mask]),
        dual_coefs=np.ascontiguousarray(beta[sv_mask]),
        bias=float(bias),
        scaler=scaler,
    )


def predict(model: SvrModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.support_vectors.shape[1]:
        raise TrainingError(
            f"feature dim {X.shape[1]} does not match model dim {model.support_vectors.shape[1]}"
        )
    K = rbf_kernel(model.scaler.apply(X), model.support_vectors, model.gamma)
    out = K @ model.dual_coefs + model.bias
    return float(out[0]) if single else out


def grid_search(X_train, y_train, grid: HyperGrid, rng: np.random.Generator,
                epsilon: float = DEFAULT_EPSILON) -> tuple[float, float]:
    """Select (C, gamma) by SRCC on a random 20% tuning split of the train set.

    Ties break toward smaller C, then smaller gamma. A singleton grid is
    returned without any training.
    """
    if len(grid.c_values) == 1 and len(grid.gamma_values) == 1:
        return grid.c_values[0], grid.gamma_values[0]
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    n = X_train.shape[0]
    n_tune = int(round(0.2 * n))
    if n_tune < 2 or n - n_tune < 2:
        raise TrainingError(f"{n} rows is too few for an 80/20 tuning split")
    perm = rng.permutation(n)
    tune_idx = perm[:n_tune]
    fit_idx = perm[n_tune:]

    best = None
    for c in sorted(grid.c_values):
        for gamma in sorted(grid.gamma_values):
            model = train_svr(X_train[fit_idx], y_train[fit_idx], c, gamma, epsilon)
            preds = predict(model, X_train[tune_idx])
            try:
                score = srcc(preds, y_train[tune_idx])
            except MetricError:
                score = -2.0  # constant predictions rank below any real SRCC
            if best is None or score > best[0]:
                best = (score, c, gamma)
    return best[1], best[2]


def save_model(model: SvrModel, path: str | Path) -> None:
    """Versioned little-endian binary serialization."""
    n_sv, dim = model.support_vectors.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<dddd", model.gamma, model.c, model.epsilon, model.bias))
        fh.write(struct.pack("<II", n_sv, dim))
        fh.write(np.ascontiguousarray(model.scaler.min, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.scaler.max, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.support_vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.dual_coefs, dtype="<f8").tobytes())


def load_model(path: str | Path) -> SvrModel:
    with open(path, "rb") as fh:
        if fh.read(4) != MODEL_MAGIC:
            raise TrainingError(f"{path}: not a model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != MODEL_VERSION:
            raise TrainingError(f"{path}: unsupported model version {version}")
        gamma, c, epsilon, bias = struct.unpack("<dddd", fh.read(32))
        n_sv, dim = struct.unpack("<II", fh.read(8))
        lo = np.frombuffer(fh.read(8 * dim), dtype="<f8")
        hi = np.frombuffer(fh.read(8 * dim), dtype="<f8")
        sv = np.frombuffer(fh.read(8 * n_sv * dim), dtype="<f8").reshape(n_sv, dim)
        coefs = np.frombuffer(fh.read(8 * n_sv), dtype="<f8")
    return SvrModel(
        gamma=gamma, c=c, epsilon=epsilon, bias=bias,
        support_vectors=sv.copy(), dual_coefs=coefs.copy(),
        scaler=Scaler(min=lo.copy(), max=hi.copy()),
    )
