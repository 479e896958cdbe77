"""Split/CV plans, metrics, penalty tuning, and the leakage-safe pipeline."""
import json
import math

import numpy as np
import pytest

from itemdiff.evaluation import (
    EvalConfig,
    baseline_mean,
    baseline_report,
    config_fingerprint,
    default_lambda_grid,
    evaluate,
    make_cv_plan,
    pearson,
    rmse,
    split,
    tune_lambda,
)
from itemdiff.features import FeatureTable


def feature_table(X, prefix="f"):
    X = np.asarray(X, dtype=float)
    return FeatureTable(
        item_ids=tuple(f"i{k}" for k in range(X.shape[0])),
        columns=tuple(f"{prefix}{j}" for j in range(X.shape[1])),
        values=X,
    )


class TestSplit:
    def test_sizes_and_disjointness(self):
        plan = split(10, 0.8, seed=7)
        assert len(plan.train_indices) == 8
        assert len(plan.test_indices) == 2
        assert set(plan.train_indices) & set(plan.test_indices) == set()

    def test_determinism(self):
        a = split(100, 0.8, seed=7)
        b = split(100, 0.8, seed=7)
        np.testing.assert_array_equal(a.train_indices, b.train_indices)

    def test_different_seeds_differ(self):
        a = split(1000, 0.8, seed=7)
        b = split(1000, 0.8, seed=8)
        assert not np.array_equal(a.train_indices, b.train_indices)

    def test_too_small(self):
        with pytest.raises(ValueError):
            split(4, 0.8, seed=0)

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            split(10, 1.0, seed=0)


class TestCvPlan:
    def test_partition_per_repeat(self):
        plan = make_cv_plan(23, k=5, repeats=5, seed=3)
        assert plan.k == 5 and plan.repeats == 5
        for assignment in plan.folds:
            allv = np.sort(np.concatenate(assignment))
            np.testing.assert_array_equal(allv, np.arange(23))
            sizes = sorted(len(f) for f in assignment)
            assert sizes[-1] - sizes[0] <= 1

    def test_repeats_differ(self):
        plan = make_cv_plan(40, k=4, repeats=2, seed=0)
        first = [tuple(f) for f in plan.folds[0]]
        second = [tuple(f) for f in plan.folds[1]]
        assert first != second

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            make_cv_plan(3, k=5)


class TestMetrics:
    def test_rmse_perfect(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_rmse_unit_offset(self):
        assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0

    def test_rmse_hand_value(self):
        assert rmse([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) == pytest.approx(
            math.sqrt(2.0 / 3.0)
        )

    def test_rmse_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])

    def test_pearson_affine(self):
        y = np.array([1.0, 2.0, 5.0, 3.0])
        assert pearson(y, 3 * y + 7) == pytest.approx(1.0)

    def test_pearson_negation(self):
        y = np.array([1.0, 2.0, 5.0, 3.0])
        assert pearson(y, -y) == pytest.approx(-1.0)

    def test_pearson_hand_value(self):
        # cov = 1, sd = sd = sqrt(1.25) each, r = 1 / 1.25 = 0.8.
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_pearson_constant_error(self):
        with pytest.raises(ValueError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_pearson_sign_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=20)
        yhat = rng.normal(size=20)
        base = pearson(y, yhat)
        assert pearson(y, 2.5 * yhat + 3.0) == pytest.approx(base, abs=1e-12)
        assert pearson(y, -2.5 * yhat + 3.0) == pytest.approx(-base, abs=1e-12)


class TestBaseline:
    def test_predicts_mean(self):
        predictor = baseline_mean([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(predictor.predict(np.zeros((4, 2))), 2.0)

    def test_train_rmse_is_population_sd(self):
        rng = np.random.default_rng(2)
        y = rng.normal(3.0, 1.7, size=101)
        predictor = baseline_mean(y)
        assert rmse(y, predictor.predict(y)) == pytest.approx(y.std(), abs=1e-10)


class TestTuneLambda:
    def test_noise_prefers_max_shrinkage(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 8))
        y = rng.normal(size=60)  # no relation to X
        plan = make_cv_plan(60, k=5, repeats=5, seed=1)
        result = tune_lambda(X, y, [0.01, 1.0, 100.0], plan)
        assert result.lambda_star == 100.0

    def test_strong_signal_prefers_min_shrinkage(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 4))
        y = X @ np.array([2.0, -1.0, 0.5, 1.5])  # noiseless
        plan = make_cv_plan(60, k=5, repeats=5, seed=1)
        result = tune_lambda(X, y, [0.01, 1.0, 100.0], plan)
        assert result.lambda_star == 0.01

    def test_single_element_grid(self):
        X = np.zeros((10, 2))
        result = tune_lambda(X, np.zeros(10), [3.14], make_cv_plan(10, 2, 1))
        assert result.lambda_star == 3.14

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            tune_lambda(np.zeros((10, 2)), np.zeros(10), [], make_cv_plan(10, 2, 1))

    def test_curve_covers_grid(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        grid = [0.1, 1.0, 10.0]
        result = tune_lambda(X, y, grid, make_cv_plan(30, 3, 2, seed=0))
        assert sorted(result.cv_curve) == grid
        assert all(v > 0 for v in result.cv_curve.values())


class TestEvaluate:
    def test_noiseless_linear_high_correlation(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(200, 6))
        y = X @ rng.normal(size=6)
        report = evaluate(feature_table(X), y, EvalConfig(seed=0))
        assert report.test_corr > 0.999

    def test_shuffled_outcome_low_correlation(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(200, 6))
        y = X @ rng.normal(size=6)
        y_shuffled = y[rng.permutation(200)]
        report = evaluate(feature_table(X), y_shuffled, EvalConfig(seed=0))
        assert abs(report.test_corr) < 0.3

    def test_pca_reduces_feature_count(self):
        # 768-wide synthetic embedding block driven by a few latent factors.
        rng = np.random.default_rng(8)
        latent = rng.normal(size=(120, 5))
        X = latent @ rng.normal(size=(5, 768)) + 0.01 * rng.normal(size=(120, 768))
        y = latent[:, 0]
        table = feature_table(X, prefix="emb")
        config = EvalConfig(seed=0, pca_target=0.8)
        report = evaluate(table, y, config)
        assert report.extra["pca_k"] is not None
        assert report.extra["pca_k"] < 768
        assert report.extra["n_features_used"] == report.extra["pca_k"]

    def test_pca_columns_passthrough(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(80, 10))
        table = FeatureTable(
            item_ids=tuple(f"i{k}" for k in range(80)),
            columns=tuple(["keep0", "keep1"] + [f"emb{j}" for j in range(8)]),
            values=X,
        )
        config = EvalConfig(
            seed=0,
            pca_target=0.8,
            pca_columns=tuple(f"emb{j}" for j in range(8)),
        )
        report = evaluate(table, rng.normal(size=80), config)
        assert report.extra["n_features_used"] == 2 + report.extra["pca_k"]

    def test_no_leakage_bitwise(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(100, 5))
        y = X @ rng.normal(size=5) + rng.normal(size=100) * 0.2
        table = feature_table(X)
        config = EvalConfig(seed=4, pca_target=0.9)
        _, fitted = evaluate(table, y, config, return_models=True)

        plan = split(100, config.train_fraction, config.seed)
        X_mut = X.copy()
        y_mut = y.copy()
        X_mut[plan.test_indices] += 123.456
        y_mut[plan.test_indices] = -y[plan.test_indices] * 3.0 + 50.0
        _, fitted_mut = evaluate(feature_table(X_mut), y_mut, config, return_models=True)

        assert json.dumps(fitted) == json.dumps(fitted_mut)

    def test_report_determinism(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(60, 4))
        y = rng.normal(size=60)
        config = EvalConfig(seed=2)
        a = evaluate(feature_table(X), y, config)
        b = evaluate(feature_table(X), y, config)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
        assert a.fingerprint == b.fingerprint

    def test_outcome_length_checked(self):
        with pytest.raises(ValueError):
            evaluate(feature_table(np.zeros((10, 2))), np.zeros(9), EvalConfig())

    def test_baseline_report_metrics(self):
        rng = np.random.default_rng(12)
        y = rng.normal(size=50)
        report = baseline_report(y, EvalConfig(seed=1))
        plan = split(50, 0.8, seed=1)
        y_train = y[plan.train_indices]
        assert report.train_rmse == pytest.approx(y_train.std(), abs=1e-10)
        assert report.train_corr is None and report.test_corr is None

    def test_fingerprint_sensitive_to_config(self):
        assert config_fingerprint({"a": 1}) != config_fingerprint({"a": 2})
        assert config_fingerprint({"a": 1, "b": 2}) == config_fingerprint(
            {"b": 2, "a": 1}
        )

    def test_default_grid_spans_requested_range(self):
        grid = default_lambda_grid()
        assert len(grid) == 25
        assert grid[0] == pytest.approx(1e-3)
        assert grid[-1] == pytest.approx(1e3)

    def test_affine_outcome_equivariance(self):
        # Scaling the outcome rescales RMSE and keeps correlation and the
        # selected penalty, with the same grid (standardized X makes every
        # CV cell's validation RMSE scale uniformly).
        rng = np.random.default_rng(13)
        X = rng.normal(size=(150, 6))
        y = X @ rng.normal(size=6) + rng.normal(size=150) * 0.5
        config = EvalConfig(seed=3)
        base = evaluate(feature_table(X), y, config)
        scaled = evaluate(feature_table(X), 2.5 * y + 1.0, config)
        assert scaled.lambda_star == base.lambda_star
        assert scaled.test_corr == pytest.approx(base.test_corr, abs=1e-9)
        assert scaled.test_rmse == pytest.approx(2.5 * base.test_rmse, abs=1e-9)
        assert scaled.train_rmse == pytest.approx(2.5 * base.train_rmse, abs=1e-9)
