"""Hold-out cross-validation harness with median-of-iterations reporting.

Protocol per iteration: seeded random 80/20 train/test split, grid search
on the training set (SRCC on a random 20% tuning split), retrain on the
full training set with the selected hyperparameters, predict the test
set, fit the four-parameter logistic to (prediction, MOS), and record
SRCC / KRCC / PLCC / RMSE. PLCC and RMSE use the logistic-mapped
predictions; the rank metrics use the raw ones.

Split indices are drawn from numpy's PCG64 generator; iteration k is
seeded with ``seed ^ k`` so reports are reproducible across machines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import DatasetManifest
from .metrics import krcc, logistic_apply, logistic_fit, plcc, rmse, srcc
from .svr import DEFAULT_EPSILON, HyperGrid, grid_search, predict, train_svr

METRIC_NAMES = ("srcc", "krcc", "plcc", "rmse")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    feature_kind: str
    seed: int
    iterations: int
    per_iteration: dict[str, list[float]]  # metric -> length-`iterations` series
    median: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_series(cls, dataset, feature_kind, seed, series) -> "EvalReport":
        median = {m: float(np.median(series[m])) for m in METRIC_NAMES}
        std = {m: float(np.std(series[m])) for m in METRIC_NAMES}
        return cls(
            dataset=dataset,
            feature_kind=feature_kind,
            seed=seed,
            iterations=len(series["srcc"]),
            per_iteration={m: list(series[m]) for m in METRIC_NAMES},
            median=median,
            std=std,
        )

    def to_json(self) -> str:
        payload = {
            "dataset": self.dataset,
            "feature_kind": self.feature_kind,
            "seed": self.seed,
            "iterations": self.iterations,
            "median": self.median,
            "std": self.std,
            "per_iteration": self.per_iteration,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_table(self) -> str:
        lines = [
            f"dataset: {self.dataset}   features: {self.feature_kind}   "
            f"iterations: {self.iterations}   seed: {self.seed}",
            f"{'METRIC':8} {'MEDIAN(+/- std)':>22}",
        ]
        for m in METRIC_NAMES:
            lines.append(f"{m.upper():8} {self.median[m]:10.4f}(+/-{self.std[m]:.4f})")
        return "\n".join(lines)


def split_indices(n: int, rng: np.random.Generator, test_fraction: float = 0.2):
    n_test = int(round(test_fraction * n))
    if n_test < 2 or n - n_test < 2:
        raise EvaluationError(f"{n} videos is too few for a >=2-item test split")
    perm = rng.permutation(n)
    return perm[n_test:], perm[:n_test]


def run_iteration(X, y, rng, grid, epsilon, regrid=True, fixed_params=None):
    train_idx, test_idx = split_indices(X.shape[0], rng)
    X_train, y_train = X[train_idx], y[train_idx]
    if regrid or fixed_params is None:
        c, gamma = grid_search(X_train, y_train, grid, rng, epsilon)
    else:
        c, gamma = fixed_params
    model = train_svr(X_train, y_train, c, gamma, epsilon)
    preds = predict(model, X[test_idx])
    y_test = y[test_idx]
    params = logistic_fit(preds, y_test)
    mapped = logistic_apply(params, preds)
    return {
        "srcc": srcc(preds, y_test),
        "krcc": krcc(preds, y_test),
        "plcc": plcc(mapped, y_test),
        "rmse": rmse(mapped, y_test),
    }, (c, gamma)


def crossval_run(
    features: dict[str, np.ndarray],
    manifest: DatasetManifest,
    feature_kind: str,
    iterations: int = 100,
    seed: int = 0,
    grid: HyperGrid | None = None,
    epsilon: float = DEFAULT_EPSILON,
    regrid_per_iteration: bool = True,
) -> EvalReport:
    """Run the full cross-validation protocol over cached features.

    ``features`` maps video_id to its feature vector and must cover every
    manifest record. With ``regrid_per_iteration=False`` the grid search
    runs only on the first iteration and its selection is reused.
    """
    missing = [rec.video_id for rec in manifest if rec.video_id not in features]
    if missing:
        raise EvaluationError(f"features missing for: {', '.join(missing)}")
    X = np.stack([np.asarray(features[rec.video_id], dtype=np.float64) for rec in manifest])
    y = np.array([rec.mos for rec in manifest])

    series = {m: [] for m in METRIC_NAMES}
    fixed_params = None
    for k in range(iterations):
        rng = np.random.Generator(np.random.PCG64(seed ^ k))
        metrics, params = run_iteration(
            X, y, rng, grid or HyperGrid(), epsilon,
            regrid=regrid_per_iteration or k == 0,
            fixed_params=fixed_params,
        )
        if not regrid_per_iteration:
            fixed_params = params
        for m in METRIC_NAMES:
            series[m].append(metrics[m])
    return EvalReport.from_series(manifest.name, feature_kind, seed, series)
