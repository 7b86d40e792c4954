import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from cepmc.errors import AllWeightsZero, NotPositiveDefinite
from cepmc.gaussian import (
    GaussianParams,
    draw,
    factorize,
    log_density,
    weighted_moment_update,
)

LOG_2PI = np.log(2.0 * np.pi)


class TestFactorize:
    def test_identity(self):
        assert np.array_equal(factorize(np.eye(2)), np.eye(2))

    def test_diagonal_square_roots(self):
        lower = factorize(np.array([[4.0, 0.0], [0.0, 9.0]]))
        assert np.array_equal(lower, np.array([[2.0, 0.0], [0.0, 3.0]]))

    def test_rank_one_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            factorize(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_zero_matrix_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            factorize(np.zeros((3, 3)))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            factorize(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_tiny_pivot_treated_as_singular(self):
        cov = np.diag([1.0, 1e-30])
        with pytest.raises(NotPositiveDefinite):
            factorize(cov)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31 - 1))
    def test_reconstruction_on_random_spd(self, dim, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((dim, dim))
        cov = a.T @ a + 1e-3 * np.eye(dim)
        cov = 0.5 * (cov + cov.T)
        lower = factorize(cov)
        assert np.all(np.diag(lower) > 0)
        rebuilt = lower @ lower.T
        assert np.max(np.abs(rebuilt - cov)) <= 1e-10 * np.max(np.abs(cov))


class TestGaussianParams:
    def test_symmetrized_on_creation(self):
        cov = np.array([[1.0, 0.3 + 1e-12], [0.3, 1.0]])
        params = GaussianParams([0.0, 0.0], cov)
        assert np.array_equal(params.cov, params.cov.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            GaussianParams([0.0, 0.0, 0.0], np.eye(2))

    def test_chol_cached(self):
        params = GaussianParams([0.0], [[4.0]])
        assert params.chol() is params.chol()


class TestLogDensity:
    def test_standard_normal_origin_2d(self):
        params = GaussianParams(np.zeros(2), np.eye(2))
        assert log_density(params, np.zeros(2)) == pytest.approx(-LOG_2PI, abs=1e-12)

    def test_standard_normal_1d_at_one(self):
        params = GaussianParams([0.0], [[1.0]])
        assert log_density(params, np.array([1.0])) == pytest.approx(-0.5 * LOG_2PI - 0.5, abs=1e-12)

    def test_zero_quadratic_form(self):
        params = GaussianParams([1.0, 1.0], 2.0 * np.eye(2))
        expected = -LOG_2PI - np.log(2.0)
        assert log_density(params, np.array([1.0, 1.0])) == pytest.approx(expected, abs=1e-12)

    def test_batched_matches_scalar(self):
        rng = np.random.default_rng(0)
        params = GaussianParams([0.5, -0.5], np.array([[2.0, 0.4], [0.4, 1.0]]))
        pts = rng.standard_normal((10, 2))
        batched = log_density(params, pts)
        for point, value in zip(pts, batched):
            assert log_density(params, point) == pytest.approx(value, rel=1e-14)

    def test_integrates_to_one_1d(self):
        params = GaussianParams([2.0], [[2.25]])
        sigma = 1.5
        xs = np.linspace(2.0 - 10 * sigma, 2.0 + 10 * sigma, 20001)
        dens = np.exp(log_density(params, xs[:, None]))
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)


class TestDraw:
    def test_deterministic_given_seed(self):
        params = GaussianParams([0.0, 0.0], np.diag([4.0, 1.0]))
        first = draw(params, np.random.default_rng(42), 1000)
        second = draw(params, np.random.default_rng(42), 1000)
        assert np.array_equal(first, second)

    def test_sample_means_within_lln_bound(self):
        count = 10**5
        params = GaussianParams(np.zeros(3), np.eye(3))
        samples = draw(params, np.random.default_rng(7), count)
        assert np.all(np.abs(samples.mean(axis=0)) < 4.0 / np.sqrt(count))

    def test_sample_variances_within_5_percent(self):
        params = GaussianParams(np.zeros(2), np.diag([4.0, 1.0]))
        samples = draw(params, np.random.default_rng(11), 10**5)
        variances = samples.var(axis=0)
        assert abs(variances[0] - 4.0) < 0.05 * 4.0
        assert abs(variances[1] - 1.0) < 0.05 * 1.0

    def test_count_must_be_positive(self):
        params = GaussianParams([0.0], [[1.0]])
        with pytest.raises(ValueError):
            draw(params, np.random.default_rng(0), 0)


class TestWeightedMomentUpdate:
    def test_uniform_weights_give_sample_moments(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal((25, 2))
        updated = weighted_moment_update(samples, np.ones(25))
        assert np.allclose(updated.mean, samples.mean(axis=0), atol=1e-14)
        # ML normalization: 1/K, not 1/(K-1)
        assert np.allclose(updated.cov, np.cov(samples.T, bias=True), atol=1e-14)

    def test_point_mass_collapses_and_fails_factorization(self):
        samples = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        weights = np.array([0.0, 1.0, 0.0])
        updated = weighted_moment_update(samples, weights)
        assert np.array_equal(updated.mean, samples[1])
        assert np.array_equal(updated.cov, np.zeros((2, 2)))
        with pytest.raises(NotPositiveDefinite):
            updated.chol()

    def test_all_zero_weights(self):
        with pytest.raises(AllWeightsZero):
            weighted_moment_update(np.ones((3, 2)), np.zeros(3))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            weighted_moment_update(np.ones((2, 1)), np.array([1.0, -0.5]))

    def test_retained_cov_required_when_not_updating(self):
        with pytest.raises(ValueError):
            weighted_moment_update(np.ones((2, 1)), np.ones(2), update_cov=False)

    def test_retained_cov_passthrough(self):
        kept = np.array([[2.0, 0.0], [0.0, 3.0]])
        updated = weighted_moment_update(np.ones((4, 2)), np.ones(4),
                                         update_cov=False, retained_cov=kept)
        assert np.array_equal(updated.cov, kept)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(-40, 40))
    def test_dyadic_rescaling_is_exact(self, seed, exponent):
        rng = np.random.default_rng(seed)
        samples = rng.standard_normal((8, 2))
        weights = rng.uniform(0.01, 1.0, 8)
        base = weighted_moment_update(samples, weights)
        scaled = weighted_moment_update(samples, weights * 2.0**exponent)
        assert np.array_equal(base.mean, scaled.mean)
        assert np.array_equal(base.cov, scaled.cov)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1),
           st.floats(0.1, 10.0, allow_nan=False, allow_infinity=False))
    def test_arbitrary_rescaling_within_rounding(self, seed, factor):
        rng = np.random.default_rng(seed)
        samples = rng.standard_normal((8, 2))
        weights = rng.uniform(0.01, 1.0, 8)
        base = weighted_moment_update(samples, weights)
        scaled = weighted_moment_update(samples, weights * factor)
        mean_scale = max(1.0, np.max(np.abs(base.mean)))
        cov_scale = max(1.0, np.max(np.abs(base.cov)))
        assert np.max(np.abs(base.mean - scaled.mean)) <= 1e-14 * mean_scale
        assert np.max(np.abs(base.cov - scaled.cov)) <= 1e-14 * cov_scale

    def test_draw_roundtrip_recovers_parameters(self):
        count = 10**5
        true = GaussianParams([1.0, -2.0], np.array([[2.0, 0.6], [0.6, 1.0]]))
        samples = draw(true, np.random.default_rng(19), count)
        fitted = weighted_moment_update(samples, np.ones(count))
        mean_se = np.sqrt(np.diag(true.cov) / count)
        assert np.all(np.abs(fitted.mean - true.mean) < 4.0 * mean_se)
        # var(C_ij_hat) ~ (C_ii C_jj + C_ij^2)/count for Gaussian samples
        cov_se = np.sqrt((np.outer(np.diag(true.cov), np.diag(true.cov))
                          + true.cov**2) / count)
        assert np.all(np.abs(fitted.cov - true.cov) < 4.0 * cov_se)


def _fit_by_search(samples, weights):
    """Gradient-free maximization of sum_k w_k ln N(x_k; mean, cov)."""
    dim = samples.shape[1]
    tril = np.tril_indices(dim)
    diag = np.arange(dim)

    def unpack(theta):
        mean = theta[:dim]
        lower = np.zeros((dim, dim))
        lower[tril] = theta[dim:]
        lower[diag, diag] = np.exp(lower[diag, diag])
        return mean, lower

    def negative(theta):
        mean, lower = unpack(theta)
        params = GaussianParams(mean, lower @ lower.T + 0.0)
        try:
            values = log_density(params, samples)
        except NotPositiveDefinite:
            return 1e12
        return -float(np.sum(weights * np.atleast_1d(values)))

    start_cov = np.cov(samples.T, bias=True).reshape(dim, dim) + 1e-9 * np.eye(dim)
    lower0 = np.linalg.cholesky(start_cov)
    lower0[diag, diag] = np.log(lower0[diag, diag])
    theta0 = np.concatenate([samples.mean(axis=0), lower0[tril]])
    best = minimize(negative, theta0, method="Nelder-Mead",
                    options={"maxiter": 20000, "xatol": 1e-10, "fatol": 1e-12})
    mean, lower = unpack(best.x)
    return mean, lower @ lower.T


def test_closed_form_matches_numerical_search_2d():
    rng = np.random.default_rng(2024)
    samples = rng.standard_normal((15, 2)) + np.array([0.3, -0.7])
    weights = rng.uniform(0.05, 1.0, 15)
    closed = weighted_moment_update(samples, weights)
    mean, cov = _fit_by_search(samples, weights)
    assert np.max(np.abs(mean - closed.mean)) < 1e-4
    assert np.max(np.abs(cov - closed.cov)) < 1e-4
