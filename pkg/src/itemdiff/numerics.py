"""Standardization, PCA with a variance target, and closed-form ridge.

All three are deterministic: PCA uses an SVD with a fixed sign convention
(largest-magnitude loading of each component is positive), and ridge solves
the penalized normal equations directly.  Models are immutable after fit
and serialize to versioned JSON for downstream scoring.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "StandardizationParams",
    "PcaModel",
    "RidgeModel",
    "standardize_fit",
    "standardize_apply",
    "pca_fit",
    "pca_transform",
    "pca_inverse_transform",
    "ridge_fit",
    "ridge_predict",
    "model_to_dict",
    "model_from_dict",
]

FORMAT_VERSION = 1


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column centering/scaling statistics learned from training rows.

    Constant columns (sd = 0) are flagged and standardized with a divisor
    of 1, so they map to exactly 0 rather than NaN.
    """

    means: np.ndarray
    sds: np.ndarray
    constant: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.means.shape[0]


def standardize_fit(X) -> StandardizationParams:
    """Column means and population standard deviations of X (>= 2 rows).

    A column is flagged constant when its sd is zero or negligible relative
    to its mean (below ~1e-13 relatively): exact zero tests misfire on
    floating point, both when squared deviations underflow and when a
    column varies only at the last-ulp level.
    """
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("standardization requires at least 2 rows")
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    constant = sds <= 1e-13 * np.abs(means)
    return StandardizationParams(means=means, sds=sds, constant=constant)


def standardize_apply(params: StandardizationParams, X) -> np.ndarray:
    """(x - mean) / sd using the fitted statistics; constant columns use sd 1."""
    X = _as_matrix(X)
    if X.shape[1] != params.n_columns:
        raise ValueError(
            f"column count mismatch: params have {params.n_columns}, "
            f"matrix has {X.shape[1]}"
        )
    divisors = np.where(params.constant, 1.0, params.sds)
    return (X - params.means) / divisors


@dataclass(frozen=True)
class PcaModel:
    """Principal components retained to meet an explained-variance target.

    ``components`` has orthonormal columns (input_dim x k).  The ratio
    spectrum covers every component of the training covariance, so the
    retained k is reproducible: it is the smallest k whose cumulative ratio
    reaches ``variance_target``.
    """

    components: np.ndarray
    center: np.ndarray
    explained_variance_ratios: np.ndarray
    k: int
    variance_target: float

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]


def pca_fit(X, variance_target: float = 0.8) -> PcaModel:
    """Fit principal components of X, keeping the fewest that explain
    ``variance_target`` of total variance.

    X is centered internally and the centering vector is stored in the
    model.  Components carry a deterministic sign: the largest-magnitude
    loading of each component is positive.
    """
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("PCA requires at least 2 rows")
    if not (0.0 < variance_target <= 1.0):
        raise ValueError(f"variance target must lie in (0, 1], got {variance_target}")
    center = X.mean(axis=0)
    Xc = X - center
    # SVD of the centered matrix: eigenvalues of the covariance are s^2 / n.
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2
    total = var.sum()
    if total == 0.0:
        raise ValueError("PCA on a constant matrix: total variance is zero")
    ratios = var / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = min(k, len(ratios))
    components = vt[:k].T.copy()
    for j in range(k):
        i = int(np.argmax(np.abs(components[:, j])))
        if components[i, j] < 0:
            components[:, j] = -components[:, j]
    return PcaModel(
        components=components,
        center=center,
        explained_variance_ratios=ratios,
        k=k,
        variance_target=float(variance_target),
    )


def pca_transform(model: PcaModel, X) -> np.ndarray:
    """Project rows of X (centered by the model) onto the retained components."""
    X = _as_matrix(X)
    if X.shape[1] != model.input_dim:
        raise ValueError(
            f"column count mismatch: model expects {model.input_dim}, "
            f"matrix has {X.shape[1]}"
        )
    return (X - model.center) @ model.components


def pca_inverse_transform(model: PcaModel, scores) -> np.ndarray:
    """Map component scores back to the original space (lossless at full rank)."""
    scores = _as_matrix(scores)
    if scores.shape[1] != model.k:
        raise ValueError(
            f"score width {scores.shape[1]} does not match k={model.k}"
        )
    return scores @ model.components.T + model.center


@dataclass(frozen=True)
class RidgeModel:
    """Closed-form L2-penalized linear model.

    Coefficients solve (Xc' Xc + lambda I) beta = Xc' yc on column-centered
    data; the intercept is the training outcome mean and is never
    penalized, so the infinite-shrinkage limit is the mean predictor.
    ``standardization``, when present, is applied to inputs at prediction
    time (the caller fit it on training rows).
    """

    coefficients: np.ndarray
    intercept: float
    lam: float
    x_center: np.ndarray
    standardization: StandardizationParams | None = None


def ridge_fit(
    X,
    y,
    lam: float,
    standardization: StandardizationParams | None = None,
) -> RidgeModel:
    """Fit ridge coefficients at penalty ``lam`` >= 0.

    X is expected in the space the model will predict from after its
    stored standardization is applied; pass the params used so prediction
    can reproduce the transform.  lam = 0 on a singular system raises
    rather than silently pseudo-inverting.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if X.shape[0] < 2:
        raise ValueError("ridge requires at least 2 rows")
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    x_center = X.mean(axis=0)
    Xc = X - x_center
    yc = y - y.mean()
    gram = Xc.T @ Xc
    if lam == 0.0:
        eigvals = np.linalg.eigvalsh(gram)
        tol = max(gram.shape) * np.finfo(float).eps * max(eigvals[-1], 0.0)
        if eigvals[0] <= tol:
            raise np.linalg.LinAlgError(
                "singular system at lambda=0 (collinear or constant columns); "
                "use lambda > 0"
            )
    A = gram + lam * np.eye(X.shape[1])
    beta = np.linalg.solve(A, Xc.T @ yc)
    return RidgeModel(
        coefficients=beta,
        intercept=float(y.mean()),
        lam=float(lam),
        x_center=x_center,
        standardization=standardization,
    )


def ridge_predict(model: RidgeModel, X) -> np.ndarray:
    """intercept + centered X . beta, standardizing first if the model has params."""
    X = _as_matrix(X)
    if model.standardization is not None:
        X = standardize_apply(model.standardization, X)
    if X.shape[1] != model.coefficients.shape[0]:
        raise ValueError(
            f"column count mismatch: model has {model.coefficients.shape[0]} "
            f"coefficients, matrix has {X.shape[1]} columns"
        )
    return model.intercept + (X - model.x_center) @ model.coefficients


def _ridge_coefficient_path(Xc: np.ndarray, yc: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    """Coefficient vectors for every lambda in one eigendecomposition.

    Used by cross-validation: the symmetric eigendecomposition of Xc'Xc is
    computed once per fold and reused across the grid.  Returns an array of
    shape (len(grid), n_columns).
    """
    gram = Xc.T @ Xc
    w, V = np.linalg.eigh(gram)
    proj = V.T @ (Xc.T @ yc)
    out = np.empty((len(grid), Xc.shape[1]))
    for i, lam in enumerate(grid):
        out[i] = V @ (proj / (w + lam))
    return out


def _params_to_dict(params: StandardizationParams | None):
    if params is None:
        return None
    return {
        "means": params.means.tolist(),
        "sds": params.sds.tolist(),
        "constant": params.constant.astype(int).tolist(),
    }


def _params_from_dict(doc) -> StandardizationParams | None:
    if doc is None:
        return None
    return StandardizationParams(
        means=np.asarray(doc["means"], dtype=float),
        sds=np.asarray(doc["sds"], dtype=float),
        constant=np.asarray(doc["constant"], dtype=bool),
    )


def model_to_dict(model) -> dict:
    """Versioned JSON-serializable form of a RidgeModel or PcaModel."""
    if isinstance(model, RidgeModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "ridge",
            "coefficients": model.coefficients.tolist(),
            "intercept": model.intercept,
            "lambda": model.lam,
            "x_center": model.x_center.tolist(),
            "standardization": _params_to_dict(model.standardization),
        }
    if isinstance(model, PcaModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "pca",
            "components": model.components.tolist(),
            "center": model.center.tolist(),
            "explained_variance_ratios": model.explained_variance_ratios.tolist(),
            "k": model.k,
            "variance_target": model.variance_target,
        }
    if isinstance(model, StandardizationParams):
        doc = _params_to_dict(model)
        doc.update({"format_version": FORMAT_VERSION, "kind": "standardization"})
        return doc
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    kind = doc.get("kind")
    if kind == "ridge":
        return RidgeModel(
            coefficients=np.asarray(doc["coefficients"], dtype=float),
            intercept=float(doc["intercept"]),
            lam=float(doc["lambda"]),
            x_center=np.asarray(doc["x_center"], dtype=float),
            standardization=_params_from_dict(doc["standardization"]),
        )
    if kind == "pca":
        return PcaModel(
            components=np.asarray(doc["components"], dtype=float),
            center=np.asarray(doc["center"], dtype=float),
            explained_variance_ratios=np.asarray(
                doc["explained_variance_ratios"], dtype=float
            ),
            k=int(doc["k"]),
            variance_target=float(doc["variance_target"]),
        )
    if kind == "standardization":
        return _params_from_dict(doc)
    raise ValueError(f"unknown model kind {kind!r}")


def dump_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
