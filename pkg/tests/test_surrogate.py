import numpy as np
import pytest

from optiloop import surrogate
from optiloop.errors import (
    ConditioningError,
    DimensionError,
    InsufficientDataError,
    ValidationError,
)

from oracles import central_difference


def smooth_1d_data(n=5, seed=0):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0, 1, size=(n, 1)), axis=0)
    y = np.sin(3.0 * X[:, 0]) + 0.5 * X[:, 0]
    return X, y


class TestFit:
    def test_constant_targets(self):
        X = np.linspace(0, 1, 6)[:, None]
        y = np.full(6, 4.2)
        model = surrogate.fit(X, y, seed=0)
        assert model.degenerate
        assert model.hyperparams.prior_mean == pytest.approx(4.2)
        mean, _ = surrogate.predict_batch(model, np.array([[0.05], [0.5], [0.95]]))
        assert mean == pytest.approx([4.2, 4.2, 4.2], abs=1e-9)

    def test_noise_floor_interpolates(self):
        X, y = smooth_1d_data()
        model = surrogate.fit(X, y, seed=1, noise=0.0)
        mean, _ = surrogate.predict_batch(model, X)
        standardized_err = np.abs(mean - y) / model.target_std
        assert standardized_err.max() < 1e-6

    def test_rejects_tiny_datasets(self):
        with pytest.raises(InsufficientDataError):
            surrogate.fit(np.array([[0.5]]), np.array([1.0]), seed=0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            surrogate.fit(np.array([[0.0], [np.nan]]), np.array([1.0, 2.0]), seed=0)

    def test_duplicate_rows_merged(self):
        X = np.array([[0.2], [0.2], [0.8]])
        y = np.array([1.0, 3.0, 5.0])
        model = surrogate.fit(X, y, seed=0, noise=0.0)
        assert model.training_inputs.shape[0] == 2
        mean, _ = surrogate.predict_batch(model, np.array([[0.2]]))
        assert mean[0] == pytest.approx(2.0, abs=1e-4)  # averaged target

    def test_seed_determinism(self):
        X, y = smooth_1d_data(n=8, seed=3)
        a = surrogate.fit(X, y, seed=7)
        b = surrogate.fit(X, y, seed=7)
        assert a.hyperparams.lengthscales == pytest.approx(
            b.hyperparams.lengthscales, rel=1e-12
        )
        assert a.hyperparams.signal_variance == pytest.approx(
            b.hyperparams.signal_variance, rel=1e-12
        )

    def test_more_restarts_never_worse(self):
        X, y = smooth_1d_data(n=10, seed=5)
        few = surrogate.fit(X, y, seed=2, restarts=1)
        many = surrogate.fit(X, y, seed=2, restarts=6)
        assert many.log_marginal_likelihood >= few.log_marginal_likelihood - 1e-9

    def test_standardization_round_trip(self):
        X, y = smooth_1d_data(n=12, seed=9)
        y = 100.0 + 50.0 * y
        model = surrogate.fit(X, y, seed=0, noise=1e-8)
        mean, _ = surrogate.predict_batch(model, X)
        assert mean.mean() == pytest.approx(y.mean(), abs=1e-6)


class TestGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(3, 15))
            d = int(rng.integers(1, 5))
            X = rng.uniform(0, 1, size=(n, d))
            y = rng.normal(size=n)
            theta = rng.uniform(np.log(0.05), np.log(2.0), size=d + 2)

            def lml_of(t):
                value, _ = surrogate.log_marginal_likelihood(
                    X, y, np.exp(t[:d]), float(np.exp(t[d])), float(np.exp(t[d + 1]))
                )
                return value

            _, analytic = surrogate.log_marginal_likelihood(
                X, y, np.exp(theta[:d]), float(np.exp(theta[d])), float(np.exp(theta[d + 1]))
            )
            numeric = central_difference(lml_of, theta, step=1e-5)
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1.0)
            worst = max(worst, rel.max())
        assert worst < 1e-4


class TestPredict:
    def test_variance_zero_at_training_points(self):
        X, y = smooth_1d_data()
        model = surrogate.fit(X, y, seed=0, noise=0.0)
        _, var = surrogate.predict_batch(model, X)
        assert var.max() < 1e-6

    def test_reverts_to_prior_far_away(self):
        X, y = smooth_1d_data(n=6, seed=1)
        model = surrogate.fit(X, y, seed=0)
        h = model.hyperparams
        far = np.array([[X.max() + 20.0 * max(h.lengthscales)]])
        mean, var = surrogate.predict_batch(model, far)
        prior_var = (h.signal_variance + h.noise_variance) * model.target_std**2
        assert mean[0] == pytest.approx(h.prior_mean, abs=0.01 * abs(h.prior_mean) + 1e-6)
        assert var[0] == pytest.approx(prior_var, rel=0.01)

    def test_batch_equals_pointwise(self):
        X, y = smooth_1d_data(n=7, seed=2)
        model = surrogate.fit(X, y, seed=0)
        queries = np.linspace(0, 1, 9)[:, None]
        means, variances = surrogate.predict_batch(model, queries)
        for i, q in enumerate(queries):
            post = surrogate.predict(model, q)
            assert post.mean == pytest.approx(means[i])
            assert post.variance == pytest.approx(variances[i])

    def test_dimension_mismatch(self):
        X, y = smooth_1d_data()
        model = surrogate.fit(X, y, seed=0)
        with pytest.raises(DimensionError):
            surrogate.predict(model, np.array([0.1, 0.2]))

    def test_variance_non_negative(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 1, size=(20, 3))
        y = rng.normal(size=20)
        model = surrogate.fit(X, y, seed=0)
        _, var = surrogate.predict_batch(model, rng.uniform(0, 1, size=(50, 3)))
        assert (var >= 0).all()


class TestSamplePath:
    def test_training_point_pinned(self):
        X, y = smooth_1d_data()
        model = surrogate.fit(X, y, seed=0, noise=0.0)
        sample = surrogate.sample_path(model, X[:1], seed=11)
        assert sample[0] == pytest.approx(y[0], abs=1e-4)

    def test_mean_of_many_samples_matches_posterior(self):
        X, y = smooth_1d_data(n=6, seed=4)
        model = surrogate.fit(X, y, seed=0)
        query = np.array([[0.37]])
        post = surrogate.predict(model, query[0])
        draws = np.array(
            [surrogate.sample_path(model, query, seed=s)[0] for s in range(10_000)]
        )
        se = draws.std() / np.sqrt(draws.size)
        assert abs(draws.mean() - post.mean) <= 3 * se + 1e-9

    def test_seed_determinism(self):
        X, y = smooth_1d_data(n=6, seed=4)
        model = surrogate.fit(X, y, seed=0)
        grid = np.linspace(0, 1, 12)[:, None]
        a = surrogate.sample_path(model, grid, seed=3)
        b = surrogate.sample_path(model, grid, seed=3)
        assert np.array_equal(a, b)


class TestSerialization:
    def test_round_trip_predictions(self):
        X, y = smooth_1d_data(n=9, seed=6)
        model = surrogate.fit(X, y, seed=0)
        clone = surrogate.gp_from_dict(surrogate.gp_to_dict(model))
        queries = np.linspace(0, 1, 7)[:, None]
        m1, v1 = surrogate.predict_batch(model, queries)
        m2, v2 = surrogate.predict_batch(clone, queries)
        assert m1 == pytest.approx(m2, abs=1e-9)
        assert v1 == pytest.approx(v2, abs=1e-9)
