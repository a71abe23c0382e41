import csv

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from learnedreg.errors import CapacityError, ConfigError, DimensionError
from learnedreg.radon import Geometry, build_operator, forward
from learnedreg.spectral import (OperatorSVD, SpectralStats, classical_coefficients,
                                 compute_spectral_stats, compute_svd, expected_error,
                                 expected_smoothness, export_coefficients_csv,
                                 optimal_coefficients_empirical, optimal_coefficients_population,
                                 range_condition_weights, reconstruct_series,
                                 reconstruct_spectral, spectral_objective)


def identity_svd(n):
    return OperatorSVD(U=np.eye(n), sigma=np.ones(n), V=np.eye(n))


# --- SVD -----------------------------------------------------------------

def test_svd_diagonal():
    svd = compute_svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(svd.sigma, [3, 1])
    np.testing.assert_allclose(np.abs(svd.U), np.eye(2))
    np.testing.assert_allclose(np.abs(svd.V), np.eye(2))


def test_svd_reconstructs_random_matrix(rng):
    a = rng.standard_normal((6, 4))
    svd = compute_svd(a)
    assert np.linalg.norm(a - svd.V @ np.diag(svd.sigma) @ svd.U.T) <= 1e-10


def test_svd_matches_gesvd_oracle():
    op = build_operator(Geometry(4, 8, 6))
    svd = compute_svd(op)
    ref = scipy.linalg.svd(op.toarray(), compute_uv=False, lapack_driver="gesvd")
    ref = ref[ref >= 1e-12 * ref[0]]
    np.testing.assert_allclose(svd.sigma, ref, rtol=0, atol=1e-8)
    np.testing.assert_allclose(svd.U.T @ svd.U, np.eye(svd.rank), atol=1e-12)
    np.testing.assert_allclose(svd.V.T @ svd.V, np.eye(svd.rank), atol=1e-12)


def test_svd_truncates_null_directions(rng):
    a = rng.standard_normal((8, 3)) @ rng.standard_normal((3, 5))
    svd = compute_svd(a)
    assert svd.rank == 3


def test_svd_sign_convention(small_op):
    svd = compute_svd(small_op)
    peak = svd.U[np.abs(svd.U).argmax(axis=0), np.arange(svd.rank)]
    assert np.all(peak > 0)


def test_svd_capacity_error(small_op):
    with pytest.raises(CapacityError, match="reduce the image size"):
        compute_svd(small_op, memory_budget=1000)


# --- statistics ------------------------------------------------------------

def test_stats_zero_noise(small_op, small_geometry, rng):
    svd = compute_svd(small_op)
    st_ = compute_spectral_stats(svd, rng.random((3,) + small_geometry.image_shape),
                                 np.zeros((3,) + small_geometry.sinogram_shape))
    assert not st_.Delta.any() and not st_.Gamma.any()


def test_stats_first_singular_vector(small_op, small_geometry):
    svd = compute_svd(small_op)
    st_ = compute_spectral_stats(svd, svd.U[:, :1].T, np.zeros((1, small_geometry.num_rays)))
    assert st_.Pi[0] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(st_.Pi[1:]).max() <= 1e-24


def test_stats_hand_computed():
    images = np.array([[1.0, 2, 0, 0], [3, 0, 1, 0]])
    noises = np.array([[1.0, 0, 0, 1], [0, -1, 2, 0]])
    st_ = compute_spectral_stats(identity_svd(4), images, noises)
    np.testing.assert_allclose(st_.Pi, [5, 2, 0.5, 0])
    np.testing.assert_allclose(st_.Delta, [0.5, 0.5, 2, 0.5])
    np.testing.assert_allclose(st_.Gamma, [0.5, 0, 1, 0])


def test_stats_length_mismatch():
    with pytest.raises(DimensionError):
        compute_spectral_stats(identity_svd(2), np.zeros((2, 2)), np.zeros((3, 2)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gamma_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    svd = identity_svd(5)
    st_ = compute_spectral_stats(svd, rng.standard_normal((7, 5)), rng.standard_normal((7, 5)))
    assert np.all(st_.Gamma**2 <= st_.Pi * st_.Delta * (1 + 1e-12))


# --- coefficients ---------------------------------------------------------

def test_population_examples():
    sigma = np.array([2.0, 0.5])
    np.testing.assert_allclose(optimal_coefficients_population(sigma, [1, 3], [0, 0]).g, 1 / sigma)
    assert optimal_coefficients_population([1.0], [0.0], [1.0]).g[0] == 0
    assert optimal_coefficients_population([1.0], [1.0], [1.0]).g[0] == 0.5
    assert optimal_coefficients_population([1.0], [0.0], [0.0]).g[0] == 0
    with pytest.raises(ConfigError):
        optimal_coefficients_population([1.0], [-1.0], [1.0])


def test_empirical_reduces_to_population(rng):
    sigma, pi, delta = rng.random((3, 6)) + 0.1
    st_ = SpectralStats(pi, delta, np.zeros(6), 10)
    np.testing.assert_array_equal(optimal_coefficients_empirical(sigma, st_).g,
                                  optimal_coefficients_population(sigma, pi, delta).g)


def test_empirical_unit_instance():
    # data coefficient 2 explains signal coefficient 1 best with g = 1/2
    st_ = SpectralStats(np.ones(1), np.ones(1), np.ones(1), 1)
    assert optimal_coefficients_empirical(np.ones(1), st_).g[0] == 0.5


def test_empirical_single_sample_grid_search():
    sigma = np.array([1.5, 0.4])
    u = np.array([0.7, -0.3])
    nu = np.array([0.2, 0.5])
    svd = OperatorSVD(np.eye(2), sigma, np.eye(2))
    f = sigma * u + nu
    st_ = compute_spectral_stats(svd, u[None], nu[None])
    g_closed = optimal_coefficients_empirical(sigma, st_).g
    grid = np.arange(-50000, 50001) * 1e-4
    for n in range(2):
        err = (u[n] - grid * f[n]) ** 2
        assert abs(grid[err.argmin()] - g_closed[n]) <= 1e-3


def test_classical_examples():
    sigma = np.array([2.0, 1.0, 0.1])
    pinv = classical_coefficients("pseudo_inverse", sigma).g
    np.testing.assert_allclose(pinv, 1 / sigma)
    gaps = [np.max(np.abs(classical_coefficients("tikhonov", sigma, a).g / pinv - 1))
            for a in (1e-4, 1e-8, 1e-12)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 1e-9
    np.testing.assert_array_equal(classical_coefficients("tsvd", sigma, 0.0).g, pinv)
    np.testing.assert_array_equal(classical_coefficients("tsvd", sigma, 0.5).g, [0.5, 1.0, 0.0])
    assert classical_coefficients("tikhonov", np.ones(1), 1.0).g[0] == 0.5
    with pytest.raises(ConfigError):
        classical_coefficients("landweber", sigma)


def test_tikhonov_recovery(rng):
    sigma = np.sort(rng.random(50))[::-1] + 1e-3
    pi, delta2 = 0.37, 0.021
    g = optimal_coefficients_population(sigma, np.full(50, pi), np.full(50, delta2)).g
    np.testing.assert_allclose(g, sigma / (sigma**2 + delta2 / pi), rtol=1e-14)


# --- reconstruction -------------------------------------------------------

def test_pseudo_inverse_inverts_on_range(small_op, small_geometry, rng):
    svd = compute_svd(small_op)
    u = svd.U @ rng.standard_normal(svd.rank)
    f = forward(small_op, u)
    rec = reconstruct_spectral(small_op, svd, classical_coefficients("pseudo_inverse", svd.sigma), f)
    np.testing.assert_allclose(rec.ravel(), u, atol=1e-8)


def test_zero_coefficients_zero_image(small_op, small_geometry, rng):
    svd = compute_svd(small_op)
    rec = reconstruct_spectral(small_op, svd, np.zeros(svd.rank),
                               rng.random(small_geometry.sinogram_shape))
    assert rec.shape == small_geometry.image_shape and not rec.any()


def test_factored_form_matches_series(small_op, small_geometry, rng):
    svd = compute_svd(small_op)
    g = rng.random(svd.rank)
    f = rng.standard_normal((4,) + small_geometry.sinogram_shape)
    a = reconstruct_spectral(small_op, svd, g, f)
    b = reconstruct_series(svd, g, f, small_geometry.image_shape)
    assert np.abs(a - b).max() <= 1e-10 * np.linalg.norm(f)


def test_coefficient_length_checked(small_op, small_geometry):
    svd = compute_svd(small_op)
    with pytest.raises(DimensionError):
        reconstruct_spectral(small_op, svd, np.ones(3), np.zeros(small_geometry.sinogram_shape))


# --- expected error and smoothness ----------------------------------------

def test_expected_error_examples():
    assert expected_error([1.0, 2.0], [1.0, 3.0], [0.0, 0.0]) == 0
    assert expected_error([1.0], [1.0], [1.0]) == 0.5


def test_expected_error_monte_carlo():
    rng = np.random.default_rng(2024)
    sigma = np.array([2.0, 1.0, 0.6, 0.3, 0.05])
    pi = np.array([1.0, 0.8, 0.5, 0.3, 0.2])
    delta = np.array([0.1, 0.05, 0.2, 0.1, 0.3])
    g = optimal_coefficients_population(sigma, pi, delta).g
    n = 100_000
    a = rng.standard_normal((n, 5)) * np.sqrt(pi)
    c = rng.standard_normal((n, 5)) * np.sqrt(delta)
    err = np.sum((a - g * (sigma * a + c)) ** 2, axis=1)
    se = err.std(ddof=1) / np.sqrt(n)
    assert abs(err.mean() - expected_error(sigma, pi, delta)) <= 3 * se


def test_expected_error_equals_objective(rng):
    sigma, pi, delta = rng.random((3, 20)) + 0.05
    g = optimal_coefficients_population(sigma, pi, delta).g
    assert expected_error(sigma, pi, delta) == pytest.approx(
        spectral_objective(g, sigma, pi, delta), rel=1e-12)


def test_smoothness_examples():
    pi = np.array([0.5, 2.0])
    np.testing.assert_array_equal(expected_smoothness([1.0, 3.0], pi, [0.0, 0.0]), pi)
    assert expected_smoothness([1.0], [2.0], [2.0])[0] == 1.0
    tiny = expected_smoothness([1e-8], [1.0], [0.1])[0]
    assert 0 <= tiny < 1e-14


def test_range_condition_examples():
    np.testing.assert_array_equal(range_condition_weights([1.0, 2.0], [1.0, 3.0], [0.0, 0.0]), 0)
    assert range_condition_weights([1.0], [1.0], [1.0])[0] == 1
    sigma = np.array([1.0, 0.5, 0.1])
    pi = np.array([2.0, 1.0, 0.3])
    np.testing.assert_allclose(range_condition_weights(sigma, pi, np.full(3, 0.04)),
                               0.04**2 / (pi**2 * sigma**2))
    assert np.isinf(range_condition_weights([1.0], [0.0], [1.0])[0])


# --- properties -------------------------------------------------------------

positive = st.floats(1e-3, 10.0)


@settings(max_examples=60, deadline=None)
@given(sigma=st.lists(positive, min_size=1, max_size=6), seed=st.integers(0, 2**32 - 1))
def test_population_optimality(sigma, seed):
    rng = np.random.default_rng(seed)
    sigma = np.array(sigma)
    pi = rng.random(sigma.size) * 2
    delta = rng.random(sigma.size)
    gbar = optimal_coefficients_population(sigma, pi, delta).g
    best = spectral_objective(gbar, sigma, pi, delta)
    for _ in range(20):
        other = gbar + rng.standard_normal(sigma.size) * rng.choice([1e-4, 1e-1, 3.0])
        assert best <= spectral_objective(other, sigma, pi, delta) * (1 + 1e-12) + 1e-15


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_empirical_optimality_against_perturbations(seed):
    rng = np.random.default_rng(seed)
    sigma = rng.random(4) + 0.1
    svd = OperatorSVD(np.eye(4), sigma, np.eye(4))
    u, nu = rng.standard_normal((2, 9, 4))
    st_ = compute_spectral_stats(svd, u, nu)
    g = optimal_coefficients_empirical(sigma, st_).g
    direct = lambda h: np.mean(np.sum((u - h * (sigma * u + nu)) ** 2, axis=1))
    assert spectral_objective(g, sigma, st_.Pi, st_.Delta, st_.Gamma) == pytest.approx(direct(g))
    for _ in range(10):
        assert direct(g) <= direct(g + 0.05 * rng.standard_normal(4)) + 1e-12


def test_boundedness_lemma():
    rng = np.random.default_rng(3)
    sigma = np.sort(rng.random(40))[::-1] * 2 + 1e-4
    pi = rng.random(40) + 0.01
    delta2, c, n0 = 0.05, 0.7, 10
    delta = np.full(40, delta2)
    delta[n0:] = np.maximum(delta2 * c * pi[n0:], 1e-3)
    # hypothesis: Delta_n >= c delta^2 Pi_n beyond n0 (delta^2 = max Delta)
    d2 = delta.max()
    c_eff = np.min(delta[n0:] / (d2 * pi[n0:]))
    g = optimal_coefficients_population(sigma, pi, delta).g
    bound = max(1 / sigma[n0], 1 / (2 * np.sqrt(c_eff * d2)))
    assert np.all(g[n0:] <= bound * (1 + 1e-12))


def test_oversmoothing_ratio_properties(rng):
    sigma = np.sort(rng.random(30))[::-1] + 0.01
    pi = rng.random(30) + 0.01
    ratios = []
    for d in (1e-1, 1e-3, 1e-6, 1e-9):
        r = expected_smoothness(sigma, pi, np.full(30, d)) / pi
        assert np.all((r >= 0) & (r <= 1))
        ratios.append(r)
    assert np.all(np.diff(ratios, axis=0) >= 0)
    np.testing.assert_allclose(ratios[-1][:5], 1, atol=1e-6)
    snr = sigma**2 * pi / 0.01
    r = expected_smoothness(sigma, pi, np.full(30, 0.01)) / pi
    order = np.argsort(snr)
    assert np.all(np.diff(r[order]) >= 0)


def test_export_csv(tmp_path):
    st_ = SpectralStats(np.array([1.0, 0.5]), np.array([0.1, 0.1]), np.array([0.0, 0.01]), 3)
    sigma = np.array([2.0, 1.0])
    g = optimal_coefficients_empirical(sigma, st_)
    export_coefficients_csv(tmp_path / "c.csv", sigma, st_, g, sigma / (sigma**2 + 0.1))
    rows = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert list(rows[0]) == ["n", "sigma_n", "Pi_n", "Delta_n", "Gamma_n", "g_n", "g_tikhonov",
                             "weight_range_condition"]
    assert float(rows[1]["g_n"]) == g.g[1]
