"""Tests for the weighted base learners."""

import numpy as np
import pytest

from bagvar import (
    ConfigError,
    Dataset,
    FitError,
    LearnerSpec,
    TreeParams,
    fit_adaptive_poly,
    fit_regression_tree,
    fit_weighted_learner,
    predict_poly,
    predict_tree,
    sample_mean_learner,
)


def exhaustive_best_first_split(x, y):
    """Independent oracle: scan every midpoint threshold on one feature."""
    best = (np.inf, None)
    xs = np.unique(x)
    for lo, hi in zip(xs[:-1], xs[1:]):
        thr = 0.5 * (lo + hi)
        left = y[x <= thr]
        right = y[x > thr]
        sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        if sse < best[0]:
            best = (sse, thr)
    return best[1]


@pytest.fixture
def step_data():
    x = np.arange(0.1, 1.05, 0.1)
    y = (x > 0.5).astype(float)
    return Dataset(features=x[:, None], responses=y)


class TestRegressionTree:

    def test_first_split_matches_exhaustive_scan(self, step_data):
        model = fit_regression_tree(step_data, TreeParams(mtry=1))
        oracle_thr = exhaustive_best_first_split(
            step_data.features[:, 0], step_data.responses
        )
        assert model.feature[0] == 0
        assert model.threshold[0] == pytest.approx(oracle_thr)
        assert 0.4 < model.threshold[0] <= 0.6

    def test_constant_responses_single_leaf(self):
        data = Dataset(features=np.arange(8.0)[:, None], responses=np.full(8, 2.5))
        model = fit_regression_tree(data, TreeParams(mtry=1))
        assert model.n_leaves == 1
        assert predict_tree(model, [3.0]) == 2.5

    def test_mtry_one_of_one_feature_matches_unrestricted(self, step_data):
        a = fit_regression_tree(step_data, TreeParams(mtry=1, split_noise_seed=1))
        b = fit_regression_tree(step_data, TreeParams(mtry=1, split_noise_seed=77))
        np.testing.assert_array_equal(a.threshold, b.threshold)
        np.testing.assert_array_equal(a.value, b.value)

    def test_full_mtry_is_seed_independent(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = X[:, 0] + 2.0 * (X[:, 1] > 0) + rng.normal(scale=0.1, size=40)
        data = Dataset(features=X, responses=y)
        a = fit_regression_tree(data, TreeParams(mtry=3, split_noise_seed=0))
        b = fit_regression_tree(data, TreeParams(mtry=3, split_noise_seed=999))
        np.testing.assert_array_equal(a.threshold, b.threshold)
        np.testing.assert_array_equal(a.feature, b.feature)

    def test_predictions_within_response_range(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(size=(60, 2))
        y = rng.normal(size=60)
        data = Dataset(features=X, responses=y)
        model = fit_regression_tree(data, TreeParams(mtry=2, max_leaves=8))
        preds = model.predict(rng.uniform(size=(200, 2)))
        assert preds.min() >= y.min() - 1e-12
        assert preds.max() <= y.max() + 1e-12

    def test_training_sse_non_increasing_with_leaf_budget(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(80, 2))
        y = np.sin(6 * X[:, 0]) + rng.normal(scale=0.2, size=80)
        data = Dataset(features=X, responses=y)
        sse = []
        for leaves in (2, 4, 8, 16):
            model = fit_regression_tree(data, TreeParams(mtry=2, max_leaves=leaves))
            resid = data.responses - model.predict(X)
            sse.append((resid**2).sum())
            assert model.n_leaves <= leaves
        assert all(b <= a + 1e-9 for a, b in zip(sse, sse[1:]))

    def test_zero_weight_rows_do_not_influence_fit(self):
        x = np.arange(10.0)[:, None]
        y = np.r_[np.zeros(5), np.ones(5)]
        w = np.r_[np.ones(5), np.zeros(5)]
        data = Dataset(features=x, responses=y, weights=w)
        model = fit_regression_tree(data, TreeParams(mtry=1))
        # Only the zero-response half is visible: constant tree at 0.
        assert model.n_leaves == 1
        assert predict_tree(model, [9.0]) == 0.0

    def test_min_leaf_respected(self):
        x = np.arange(12.0)[:, None]
        y = (x[:, 0] >= 6).astype(float)
        data = Dataset(features=x, responses=y)
        model = fit_regression_tree(data, TreeParams(mtry=1, min_leaf=4))
        # Split at 5.5 leaves 6/6; later splits would need 4 rows per child.
        leaf_counts = []
        preds = model.predict(x)
        for v in np.unique(preds):
            leaf_counts.append(int((preds == v).sum()))
        assert min(leaf_counts) >= 4

    def test_all_zero_effective_rows_is_fit_error(self):
        x = np.arange(4.0)[:, None]
        with pytest.raises(ConfigError):
            Dataset(features=x, responses=np.zeros(4), weights=np.zeros(4))

    def test_boundary_routes_left(self):
        data = Dataset(
            features=np.array([[0.0], [1.0]]), responses=np.array([1.0, 2.0])
        )
        model = fit_regression_tree(data, TreeParams(mtry=1))
        assert model.threshold[0] == 0.5
        assert predict_tree(model, [0.5]) == 1.0

    def test_dimension_mismatch_raises(self, step_data):
        model = fit_regression_tree(step_data, TreeParams(mtry=1))
        with pytest.raises(ValueError):
            predict_tree(model, [0.1, 0.2])


class TestAdaptivePoly:

    def test_noiseless_linear_selects_degree_one(self):
        x = np.linspace(0.0, 1.0, 25)
        data = Dataset(features=x[:, None], responses=3.0 * x - 1.0)
        model = fit_adaptive_poly(data, d_max=6)
        assert model.degree == 1
        np.testing.assert_allclose(model.coefficients, [-1.0, 3.0], atol=1e-9)

    def test_constant_responses_degree_one_zero_slope(self):
        x = np.linspace(0.0, 1.0, 20)
        data = Dataset(features=x[:, None], responses=np.full(20, 4.0))
        model = fit_adaptive_poly(data, d_max=5)
        assert model.degree == 1
        assert model.coefficients[0] == pytest.approx(4.0, abs=1e-9)
        assert model.coefficients[1] == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("true_degree", [2, 3, 4])
    def test_noiseless_polynomial_recovered(self, true_degree):
        rng = np.random.default_rng(true_degree)
        coef = rng.normal(size=true_degree + 1)
        x = np.linspace(-1.0, 1.0, 40)
        y = np.polynomial.polynomial.polyval(x, coef)
        data = Dataset(features=x[:, None], responses=y)
        model = fit_adaptive_poly(data, d_max=6)
        assert model.degree <= 6
        resid = y - np.polynomial.polynomial.polyval(x, model.coefficients)
        assert (resid**2).sum() <= 1e-9 * len(y) * y.var()

    def test_noisy_quadratic_prefers_low_degree(self):
        # Cp occasionally overfits on unlucky noise draws; this seed is a
        # typical one (two thirds of seeds select exactly 2).
        rng = np.random.default_rng(1)
        x = np.linspace(-2.0, 2.0, 120)
        y = 1.0 + x - 0.5 * x**2 + rng.normal(scale=0.3, size=120)
        data = Dataset(features=x[:, None], responses=y)
        model = fit_adaptive_poly(data, d_max=6)
        assert model.degree == 2

    def test_weighted_fit_matches_replicated_rows(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
        y = np.array([0.1, 1.2, 1.9, 3.2, 3.8, 5.1, 6.2, 6.8])
        w = np.array([2.0, 1.0, 3.0, 1.0, 1.0, 2.0, 1.0, 1.0])
        weighted = fit_adaptive_poly(
            Dataset(features=x[:, None], responses=y, weights=w), d_max=3
        )
        reps = np.repeat(np.arange(8), w.astype(int))
        expanded = fit_adaptive_poly(
            Dataset(features=x[reps, None], responses=y[reps]), d_max=3
        )
        assert weighted.degree == expanded.degree
        np.testing.assert_allclose(weighted.coefficients, expanded.coefficients, atol=1e-8)

    def test_rank_deficient_design_raises_fit_error(self):
        # Only 3 distinct x values cannot support a degree-4 basis.
        x = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 0.0, 1.0])
        y = np.arange(8.0)
        data = Dataset(features=x[:, None], responses=y)
        with pytest.raises(FitError):
            fit_adaptive_poly(data, d_max=4)

    def test_requires_single_feature_and_enough_rows(self):
        with pytest.raises(ConfigError):
            fit_adaptive_poly(
                Dataset(features=np.zeros((10, 2)), responses=np.zeros(10)), d_max=3
            )
        with pytest.raises(ConfigError):
            fit_adaptive_poly(
                Dataset(features=np.arange(4.0)[:, None], responses=np.zeros(4)), d_max=3
            )


class TestPredictPoly:

    def test_identity_line(self):
        from bagvar import AdaptivePolyModel

        m = AdaptivePolyModel(degree=1, coefficients=np.array([0.0, 1.0]))
        assert predict_poly(m, 3.0) == 3.0

    def test_quadratic_point(self):
        from bagvar import AdaptivePolyModel

        m = AdaptivePolyModel(degree=2, coefficients=np.array([1.0, 2.0, 1.0]))
        assert predict_poly(m, 1.0) == 4.0

    def test_constant(self):
        from bagvar import AdaptivePolyModel

        m = AdaptivePolyModel(degree=1, coefficients=np.array([2.0, 0.0]))
        assert predict_poly(m, 7.0) == 2.0


class TestSampleMean:

    def test_unweighted(self):
        data = Dataset(features=np.zeros((3, 1)), responses=np.array([1.0, 2.0, 3.0]))
        assert sample_mean_learner(data) == 2.0

    def test_counts_as_weights(self):
        data = Dataset(
            features=np.zeros((3, 1)),
            responses=np.array([1.0, 2.0, 3.0]),
            weights=np.array([3.0, 0.0, 0.0]),
        )
        assert sample_mean_learner(data) == 1.0

    def test_single_row(self):
        data = Dataset(
            features=np.zeros((1, 1)), responses=np.array([5.0]), weights=np.array([4.0])
        )
        assert sample_mean_learner(data) == 5.0

    def test_equals_count_weighted_average_exactly(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=12)
        counts = rng.multinomial(12, np.full(12, 1 / 12))
        data = Dataset(
            features=np.zeros((12, 1)), responses=y, weights=counts.astype(float)
        )
        assert sample_mean_learner(data) == pytest.approx(counts @ y / 12, abs=1e-15)


class TestFitWeightedLearner:

    def test_mean_kind_constant_predictor(self):
        data = Dataset(features=np.zeros((4, 1)), responses=np.array([1.0, 2.0, 3.0, 4.0]))
        predict = fit_weighted_learner(
            LearnerSpec(kind="mean"), data, np.ones(4), seed=0
        )
        np.testing.assert_allclose(predict(np.zeros((3, 1))), 2.5)

    def test_tree_kind_defaults_mtry_to_p(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(30, 2))
        y = X[:, 0]
        data = Dataset(features=X, responses=y)
        predict = fit_weighted_learner(
            LearnerSpec(kind="tree", max_leaves=4), data, np.ones(30), seed=1
        )
        assert predict(X).shape == (30,)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            LearnerSpec(kind="boost")
