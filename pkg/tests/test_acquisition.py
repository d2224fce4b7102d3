import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optiloop import acquisition as acq
from optiloop import surrogate
from optiloop.errors import DimensionError, ValidationError
from optiloop.surrogate import Posterior

from oracles import ei_by_quadrature


class TestExpectedImprovement:
    def test_at_incumbent_with_unit_sigma(self):
        # quadrature oracle value of E[max(best - Y, 0)] at mu = best, sigma = 1
        oracle = ei_by_quadrature(0.0, 1.0, 0.0)
        got = acq.expected_improvement(Posterior(0.0, 1.0), best=0.0)
        assert got == pytest.approx(oracle, abs=1e-6)
        assert got == pytest.approx(0.3989422, abs=1e-6)

    def test_no_improvement_when_deterministic_and_worse(self):
        assert acq.expected_improvement(Posterior(1.0, 0.0), best=0.0) == 0.0

    def test_deterministic_improvement(self):
        assert acq.expected_improvement(Posterior(-2.0, 0.0), best=0.0) == 2.0

    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            mu = float(rng.normal())
            sigma = float(rng.uniform(0.1, 2.0))
            best = float(rng.normal())
            oracle = ei_by_quadrature(mu, sigma, best)
            got = acq.expected_improvement(Posterior(mu, sigma**2), best)
            assert got == pytest.approx(oracle, abs=1e-6)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            acq.expected_improvement(Posterior(np.nan, 1.0), best=0.0)

    @given(
        st.floats(-5, 5),
        st.floats(0, 3),
        st.floats(-5, 5),
    )
    def test_always_non_negative(self, mu, sigma, best):
        assert acq.expected_improvement(Posterior(mu, sigma**2), best) >= 0.0

    @given(st.floats(-3, 3), st.floats(0.1, 2), st.floats(0.05, 1))
    def test_non_decreasing_in_sigma_when_mean_not_better(self, best, sigma, bump):
        mu = best + 0.5  # mean at or above incumbent
        lo = acq.expected_improvement(Posterior(mu, sigma**2), best)
        hi = acq.expected_improvement(Posterior(mu, (sigma + bump) ** 2), best)
        assert hi >= lo - 1e-12


class TestUcb:
    def test_zero_sigma_collapses_to_mean(self):
        assert acq.ucb(Posterior(1.5, 0.0), beta=4.0) == 1.5

    def test_direct_arithmetic(self):
        assert acq.ucb(Posterior(1.0, 0.25), beta=4.0) == pytest.approx(0.0)

    @given(st.floats(-3, 3), st.floats(0, 2), st.floats(0.1, 5), st.floats(0.1, 5))
    def test_monotone_in_beta(self, mu, sigma, beta, extra):
        a = acq.ucb(Posterior(mu, sigma**2), beta)
        b = acq.ucb(Posterior(mu, sigma**2), beta + extra)
        assert b <= a + 1e-12


class TestTchebycheff:
    def test_hand_evaluated(self):
        w = acq.ScalarizationWeights(w=(1.0, 0.0), rho=0.05)
        assert acq.tchebycheff((2.0, 5.0), w) == pytest.approx(2.1)

    def test_zero_vector(self):
        w = acq.ScalarizationWeights(w=(0.5, 0.5))
        assert acq.tchebycheff((0.0, 0.0), w) == 0.0

    def test_symmetric_under_objective_swap(self):
        w = acq.ScalarizationWeights(w=(0.5, 0.5), rho=0.05)
        assert acq.tchebycheff((0.3, 0.7), w) == pytest.approx(
            acq.tchebycheff((0.7, 0.3), w)
        )

    def test_length_mismatch(self):
        w = acq.ScalarizationWeights(w=(1.0,))
        with pytest.raises(DimensionError):
            acq.tchebycheff((1.0, 2.0), w)

    def test_argmin_invariant_under_uniform_rescaling(self):
        rng = np.random.default_rng(3)
        Y = rng.uniform(0, 1, size=(20, 2))
        w = acq.simplex_weights(2, seed=5)
        norm_costs = [acq.tchebycheff(y, w) for y in acq.normalize_objectives(Y)]
        scaled = acq.normalize_objectives(Y * 37.5)
        scaled_costs = [acq.tchebycheff(y, w) for y in scaled]
        assert int(np.argmin(norm_costs)) == int(np.argmin(scaled_costs))

    def test_weights_validated(self):
        with pytest.raises(ValidationError):
            acq.ScalarizationWeights(w=(0.7, 0.7))
        with pytest.raises(ValidationError):
            acq.ScalarizationWeights(w=(0.5, 0.5), rho=0.0)

    def test_simplex_weights_seeded(self):
        assert acq.simplex_weights(3, seed=9) == acq.simplex_weights(3, seed=9)
        w = np.asarray(acq.simplex_weights(3, seed=9).w)
        assert w.sum() == pytest.approx(1.0)
        assert (w >= 0).all()


class TestNormalizeObjectives:
    def test_degenerate_range_maps_to_zero(self):
        Y = np.array([[1.0, 5.0], [2.0, 5.0]])
        normalized = acq.normalize_objectives(Y)
        assert normalized[:, 1].tolist() == [0.0, 0.0]
        assert normalized[:, 0].tolist() == [0.0, 1.0]


def fitted_models(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(8, 2))
    y1 = X[:, 0] ** 2 + X[:, 1]
    y2 = 1.0 - X[:, 0]
    return X, [surrogate.fit(X, y1, seed=1, noise=0.0), surrogate.fit(X, y2, seed=1, noise=0.0)]


class TestEvaluateAcquisition:
    def test_posterior_mean_kind(self):
        X, models = fitted_models()
        spec = acq.AcquisitionSpec(kind="posterior_mean")
        values = acq.evaluate_acquisition(spec, models, X[:3], acq.AcquisitionContext())
        for j, model in enumerate(models):
            means, _ = surrogate.predict_batch(model, X[:3])
            assert values[:, j] == pytest.approx(means)

    def test_ei_zero_at_incumbent_training_point(self):
        X, models = fitted_models()
        best = np.array(
            [surrogate.predict_batch(m, X)[0].min() for m in models]
        )
        spec = acq.AcquisitionSpec(kind="expected_improvement")
        ctx = acq.AcquisitionContext(incumbent_best=best)
        idx = [int(np.argmin(surrogate.predict_batch(m, X)[0])) for m in models]
        for j, i in enumerate(idx):
            values = acq.evaluate_acquisition(spec, models, X[i : i + 1], ctx)
            assert values[0, j] == pytest.approx(0.0, abs=1e-4)

    def test_thompson_determinism(self):
        X, models = fitted_models()
        sample = acq.draw_thompson_sample(models, dim=2, seed=4, grid_size=64)
        spec = acq.AcquisitionSpec(kind="thompson_sampling", ts_seed=4)
        ctx = acq.AcquisitionContext(thompson=sample)
        a = acq.evaluate_acquisition(spec, models, X, ctx)
        b = acq.evaluate_acquisition(spec, models, X, ctx)
        assert np.array_equal(a, b)
        again = acq.draw_thompson_sample(models, dim=2, seed=4, grid_size=64)
        assert np.array_equal(sample.values, again.values)

    def test_missing_context_errors(self):
        X, models = fitted_models()
        with pytest.raises(ValidationError):
            acq.evaluate_acquisition(
                acq.AcquisitionSpec(kind="expected_improvement"),
                models,
                X,
                acq.AcquisitionContext(),
            )
        with pytest.raises(ValidationError):
            acq.evaluate_acquisition(
                acq.AcquisitionSpec(kind="thompson_sampling"),
                models,
                X,
                acq.AcquisitionContext(),
            )

    def test_spec_field_discipline(self):
        with pytest.raises(ValidationError):
            acq.AcquisitionSpec(kind="expected_improvement", ucb_beta=1.0)
        with pytest.raises(ValidationError):
            acq.AcquisitionSpec(kind="posterior_mean", ts_seed=1)
        with pytest.raises(ValidationError):
            acq.AcquisitionSpec(kind="upper_confidence_bound", ucb_beta=-1.0)
