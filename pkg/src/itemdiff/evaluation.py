"""Evaluation protocol: train/test split, repeated k-fold penalty tuning,
RMSE / Pearson metrics, the mean-predictor baseline, and the leakage-safe
end-to-end pipeline.

The pipeline order inside ``evaluate`` is fixed: split, then (optionally)
PCA fit on training rows only, then standardization fit on training rows
only, then penalty selection by k-fold cross-validation repeated R times
(standardization refit inside each fold), then a final refit on the full
training split.  Nothing is ever fit on test rows; the no-leakage tests
assert this bitwise on the serialized models.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureTable
from .numerics import (
    PcaModel,
    StandardizationParams,
    _ridge_coefficient_path,
    model_to_dict,
    pca_fit,
    pca_transform,
    ridge_fit,
    ridge_predict,
    standardize_apply,
    standardize_fit,
)

__all__ = [
    "SplitPlan",
    "CvPlan",
    "EvalConfig",
    "EvalReport",
    "MeanPredictor",
    "split",
    "make_cv_plan",
    "rmse",
    "pearson",
    "baseline_mean",
    "tune_lambda",
    "evaluate",
    "default_lambda_grid",
    "config_fingerprint",
]


def default_lambda_grid(n: int = 25, low: float = 1e-3, high: float = 1e3) -> np.ndarray:
    """Log-spaced penalty grid spanning near-OLS to near-mean-predictor."""
    return np.logspace(math.log10(low), math.log10(high), n)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    train_fraction: float

    def __post_init__(self):
        train = set(self.train_indices.tolist())
        test = set(self.test_indices.tolist())
        if train & test:
            raise ValueError("train and test indices overlap")
        n = len(train) + len(test)
        if train | test != set(range(n)):
            raise ValueError("split does not cover all rows exactly once")


def split(n: int, fraction: float = 0.8, seed: int = 0) -> SplitPlan:
    """Seeded uniform-permutation split of ``n`` rows."""
    if n < 5:
        raise ValueError(f"need at least 5 rows to split, got {n}")
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"train fraction must lie in (0, 1), got {fraction}")
    n_train = int(round(n * fraction))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(
        seed=seed,
        train_indices=np.sort(perm[:n_train]),
        test_indices=np.sort(perm[n_train:]),
        train_fraction=fraction,
    )


@dataclass(frozen=True)
class CvPlan:
    """Per-repeat fold assignments over the training rows.

    folds[r][j] holds the validation row positions (0-based within the
    training split) of fold j in repeat r; each repeat partitions all
    training rows with fold sizes differing by at most one.
    """

    k: int
    repeats: int
    folds: tuple

    def __post_init__(self):
        for r, assignment in enumerate(self.folds):
            counts = sorted(len(f) for f in assignment)
            if counts[-1] - counts[0] > 1:
                raise ValueError(f"repeat {r}: fold sizes differ by more than one")
            seen = np.sort(np.concatenate(assignment))
            if len(np.unique(seen)) != len(seen):
                raise ValueError(f"repeat {r}: folds overlap")


def make_cv_plan(n_train: int, k: int = 5, repeats: int = 5, seed: int = 0) -> CvPlan:
    if n_train < k:
        raise ValueError(f"cannot make {k} folds from {n_train} training rows")
    rng = np.random.default_rng(seed)
    all_folds = []
    for _ in range(repeats):
        perm = rng.permutation(n_train)
        all_folds.append(tuple(np.sort(chunk) for chunk in np.array_split(perm, k)))
    return CvPlan(k=k, repeats=repeats, folds=tuple(all_folds))


def rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if y.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def pearson(y, yhat) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if y.size < 2:
        raise ValueError("correlation requires at least 2 points")
    sy = y.std()
    syh = yhat.std()
    if sy == 0.0 or syh == 0.0:
        raise ValueError("correlation is undefined for a constant input")
    cov = np.mean((y - y.mean()) * (yhat - yhat.mean()))
    return float(cov / (sy * syh))


@dataclass(frozen=True)
class MeanPredictor:
    """Constant model predicting the training-outcome mean everywhere."""

    mean: float

    def predict(self, X) -> np.ndarray:
        n = np.asarray(X).shape[0]
        return np.full(n, self.mean)


def baseline_mean(y_train) -> MeanPredictor:
    y_train = np.asarray(y_train, dtype=float).reshape(-1)
    if y_train.size == 0:
        raise ValueError("cannot fit a baseline on an empty outcome")
    return MeanPredictor(mean=float(y_train.mean()))


@dataclass(frozen=True)
class TuneResult:
    lambda_star: float
    cv_curve: dict  # lambda -> mean validation RMSE over repeats x folds


def tune_lambda(X_train, y_train, grid: Sequence[float], plan: CvPlan) -> TuneResult:
    """Mean validation RMSE per penalty over repeats x folds; argmin wins.

    Standardization is refit inside each fold's training part.  Ties are
    broken toward the larger penalty (prefer the more regularized model).
    """
    grid = [float(l) for l in grid]
    if not grid:
        raise ValueError("empty penalty grid")
    if any(l < 0 for l in grid):
        raise ValueError("penalties must be >= 0")
    if len(grid) == 1:
        return TuneResult(lambda_star=grid[0], cv_curve={grid[0]: math.nan})

    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).reshape(-1)
    n = X_train.shape[0]
    sums = np.zeros(len(grid))
    cells = 0
    for assignment in plan.folds:
        for val_rows in assignment:
            val_mask = np.zeros(n, dtype=bool)
            val_mask[val_rows] = True
            fit_rows = ~val_mask
            if fit_rows.sum() < 2 or val_mask.sum() < 1:
                raise ValueError("fold too small to fit")
            params = standardize_fit(X_train[fit_rows])
            Xf = standardize_apply(params, X_train[fit_rows])
            Xv = standardize_apply(params, X_train[val_mask])
            yf = y_train[fit_rows]
            yv = y_train[val_mask]
            x_center = Xf.mean(axis=0)
            betas = _ridge_coefficient_path(Xf - x_center, yf - yf.mean(), grid)
            preds = yf.mean() + (Xv - x_center) @ betas.T
            sums += np.sqrt(np.mean((yv[:, None] - preds) ** 2, axis=0))
            cells += 1
    means = sums / cells
    best = means.min()
    best_lambda = max(l for l, m in zip(grid, means) if m == best)
    return TuneResult(lambda_star=best_lambda, cv_curve=dict(zip(grid, means)))


@dataclass(frozen=True)
class EvalConfig:
    """Everything that determines one evaluation run (and its fingerprint).

    ``standardize_before_pca`` controls whether the PCA block is z-scored
    (on training statistics) before components are fit; both orders are
    supported and the choice is part of the fingerprint.
    """

    name: str = "experiment"
    seed: int = 0
    train_fraction: float = 0.8
    lambda_grid: tuple = field(default_factory=lambda: tuple(default_lambda_grid()))
    cv_k: int = 5
    cv_repeats: int = 5
    pca_target: float | None = None
    pca_columns: tuple | None = None
    standardize_before_pca: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "lambda_grid": list(self.lambda_grid),
            "cv_k": self.cv_k,
            "cv_repeats": self.cv_repeats,
            "pca_target": self.pca_target,
            "pca_columns": list(self.pca_columns) if self.pca_columns else None,
            "standardize_before_pca": self.standardize_before_pca,
        }


def config_fingerprint(payload) -> str:
    """Stable hash of a JSON-serializable configuration."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EvalReport:
    """One experiment's metrics; one row of the results tables."""

    name: str
    feature_spec: dict
    lambda_star: float
    train_rmse: float
    test_rmse: float
    train_corr: float | None
    test_corr: float | None
    fingerprint: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "feature_spec": self.feature_spec,
            "lambda": self.lambda_star,
            "train_rmse": self.train_rmse,
            "test_rmse": self.test_rmse,
            "train_corr": self.train_corr,
            "test_corr": self.test_corr,
            "fingerprint": self.fingerprint,
            "extra": self.extra,
        }


def _split_pca_columns(features: FeatureTable, config: EvalConfig):
    """Column indices subject to PCA vs passed through unchanged."""
    if config.pca_target is None:
        return [], list(range(features.n_columns))
    if config.pca_columns is None:
        return list(range(features.n_columns)), []
    pca_idx = []
    for name in config.pca_columns:
        try:
            pca_idx.append(features.columns.index(name))
        except ValueError:
            raise KeyError(f"pca column {name!r} not in feature table") from None
    rest = [j for j in range(features.n_columns) if j not in set(pca_idx)]
    return pca_idx, rest


def evaluate(
    features: FeatureTable,
    outcome,
    config: EvalConfig,
    return_models: bool = False,
):
    """Run the full leakage-safe pipeline and report train/test metrics.

    Returns an EvalReport, or (EvalReport, fitted) when ``return_models``
    is set, where ``fitted`` maps "pca" / "standardization" / "ridge" to
    their serialized (JSON-dict) forms for bitwise comparison.
    """
    y = np.asarray(outcome, dtype=float).reshape(-1)
    if y.shape[0] != features.n_items:
        raise ValueError(
            f"outcome length {y.shape[0]} != feature rows {features.n_items}"
        )
    plan = split(features.n_items, config.train_fraction, config.seed)
    X = features.values

    pca_idx, pass_idx = _split_pca_columns(features, config)
    X_train_raw = X[plan.train_indices]
    X_test_raw = X[plan.test_indices]
    y_train = y[plan.train_indices]
    y_test = y[plan.test_indices]

    pca_model: PcaModel | None = None
    pre_params: StandardizationParams | None = None
    if pca_idx:
        # Transforms below are fit strictly on the training partition.
        assert X_train_raw.shape[0] == plan.train_indices.shape[0]
        pca_in_train = X_train_raw[:, pca_idx]
        pca_in_test = X_test_raw[:, pca_idx]
        if config.standardize_before_pca:
            pre_params = standardize_fit(pca_in_train)
            pca_in_train = standardize_apply(pre_params, pca_in_train)
            pca_in_test = standardize_apply(pre_params, pca_in_test)
        pca_model = pca_fit(pca_in_train, config.pca_target)
        X_train = np.hstack([X_train_raw[:, pass_idx], pca_transform(pca_model, pca_in_train)])
        X_test = np.hstack([X_test_raw[:, pass_idx], pca_transform(pca_model, pca_in_test)])
        used_columns = [features.columns[j] for j in pass_idx] + [
            f"pc{i + 1}" for i in range(pca_model.k)
        ]
    else:
        X_train = X_train_raw
        X_test = X_test_raw
        used_columns = [features.columns[j] for j in pass_idx]

    assert X_train.shape[0] == plan.train_indices.shape[0]
    cv = make_cv_plan(X_train.shape[0], config.cv_k, config.cv_repeats, seed=config.seed + 1)
    tuned = tune_lambda(X_train, y_train, config.lambda_grid, cv)

    params = standardize_fit(X_train)
    Xs_train = standardize_apply(params, X_train)
    model = ridge_fit(Xs_train, y_train, tuned.lambda_star, standardization=params)
    pred_train = ridge_predict(model, X_train)
    pred_test = ridge_predict(model, X_test)

    fingerprint = config_fingerprint(config.to_dict())
    report = EvalReport(
        name=config.name,
        feature_spec={"columns": list(features.columns), "pca_target": config.pca_target},
        lambda_star=tuned.lambda_star,
        train_rmse=rmse(y_train, pred_train),
        test_rmse=rmse(y_test, pred_test),
        train_corr=pearson(y_train, pred_train),
        test_corr=pearson(y_test, pred_test),
        fingerprint=fingerprint,
        extra={
            "n_train": int(plan.train_indices.shape[0]),
            "n_test": int(plan.test_indices.shape[0]),
            "n_features_in": features.n_columns,
            "n_features_used": len(used_columns),
            "pca_k": pca_model.k if pca_model is not None else None,
            "cv_rmse": min(tuned.cv_curve.values()) if len(config.lambda_grid) > 1 else None,
        },
    )
    if not return_models:
        return report
    fitted = {
        "standardization": model_to_dict(params),
        "ridge": model_to_dict(model),
        "pca": model_to_dict(pca_model) if pca_model is not None else None,
        "pca_pre_standardization": (
            model_to_dict(pre_params) if pre_params is not None else None
        ),
    }
    return report, fitted


def baseline_report(outcome, config: EvalConfig) -> EvalReport:
    """Mean-predictor reference row under the same split as ``evaluate``.

    Correlation against a constant prediction is undefined, so both
    correlation fields are None.
    """
    y = np.asarray(outcome, dtype=float).reshape(-1)
    plan = split(y.shape[0], config.train_fraction, config.seed)
    predictor = baseline_mean(y[plan.train_indices])
    y_train = y[plan.train_indices]
    y_test = y[plan.test_indices]
    fingerprint = config_fingerprint({**config.to_dict(), "baseline": True})
    return EvalReport(
        name="baseline_mean",
        feature_spec={"columns": [], "pca_target": None},
        lambda_star=math.inf,
        train_rmse=rmse(y_train, predictor.predict(y_train)),
        test_rmse=rmse(y_test, predictor.predict(y_test)),
        train_corr=None,
        test_corr=None,
        fingerprint=fingerprint,
        extra={
            "n_train": int(plan.train_indices.shape[0]),
            "n_test": int(plan.test_indices.shape[0]),
            "baseline": True,
        },
    )
