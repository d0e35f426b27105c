import math

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from nbfts.basis import build_spline_basis, orthonormalize, project_to_basis
from nbfts.errors import InvalidStateError
from nbfts.latent import (DynamicCoefficients, FactorMatrix, _ffbs_kernel, backfit_factors, compute_zpg,
                          contemporaneous_cov, contemporaneous_cov_matrix, ffbs_coefficients, lag_cov_ar,
                          lag_cov_ar_matrix, nb_loglik_dispersion, update_ar_params, update_theta, update_xi)
from nbfts.negbin import nb_logpmf
from nbfts.simulate import true_factors

from _oracles import gaussian_smoother, simulate_ar_paths


@pytest.mark.parametrize("z,r,xi,expected", [(5, 5, 0.3, math.log(5)), (0, 1, 0.25, -2.0),
                                             (10, 2, 0.5, 8 + math.log(2))])
def test_working_response(z, r, xi, expected):
    assert compute_zpg(z, r, xi) == pytest.approx(expected, abs=1e-12)


def test_working_response_rejects_bad_state():
    with pytest.raises(InvalidStateError):
        compute_zpg(1, 1.0, 0.0)
    with pytest.raises(InvalidStateError):
        compute_zpg(1, -1.0, 1.0)


def test_theta_limits(rng):
    draw = update_theta(3, 5.0, 0.4, 1.7, 1e-6, rng)
    assert abs(draw - 1.7) < 1e-4
    draw = update_theta(7, 2.0, 1e8, 0.0, 1.0, rng)
    assert abs(draw - compute_zpg(7, 2.0, 1e8)) < 1e-3


def test_theta_conditional_moments(rng):
    z, r, xi, m, s = 4.0, 3.0, 0.7, 0.5, 0.8
    draws = np.array([update_theta(z, r, xi, m, s, rng) for _ in range(40_000)])
    prec = xi + 1 / s ** 2
    mean = (xi * compute_zpg(z, r, xi) + m / s ** 2) / prec
    assert abs(draws.mean() - mean) < 4 * math.sqrt(1 / prec / draws.size)
    assert draws.var() == pytest.approx(1 / prec, rel=0.03)


@pytest.mark.parametrize("z,r,theta,expected,tol", [(0, 1.0, 0.0, 0.25, 0.005),
                                                    (3, 1.0, 2.0, math.tanh(1.0), 0.02)])
def test_xi_moments(z, r, theta, expected, tol):
    rng = np.random.default_rng(9)
    x = update_xi(np.full(100_000, z), r, np.full(100_000, theta), rng)
    assert abs(x.mean() - expected) < tol


def test_xi_determinism():
    a = update_xi(np.arange(5), 2.0, np.zeros(5), np.random.default_rng(1))
    b = update_xi(np.arange(5), 2.0, np.zeros(5), np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)


def test_dispersion_loglik_matches_pmf():
    z = np.array([[0, 3, 8], [1, 1, 20]])
    theta = np.array([[0.1, 1.0, 2.0], [-0.5, 0.3, 3.1]])
    ll = nb_loglik_dispersion(z, theta)
    # equal up to the r-free term sum(log z!)
    const = ll(1.0) - nb_logpmf(z, 1.0, theta).sum()
    for r in (0.5, 4.0, 90.0):
        assert ll(r) - const == pytest.approx(nb_logpmf(z, r, theta).sum(), rel=1e-10)


# --------------------------------------------------------------------------
# factors

def _factor_state(basis, K, lam, rng):
    F0 = orthonormalize(rng.standard_normal((basis.B.shape[0], K)))
    F0 = orthonormalize(basis.B @ project_to_basis(F0, basis))
    return FactorMatrix(F0, project_to_basis(F0, basis), np.full(K, lam))


def test_heavy_smoothing_gives_a_line(rng):
    m, n = 30, 20
    basis = build_spline_basis(np.arange(float(m)), 8)
    data = rng.standard_normal((n, m)) + np.sin(np.linspace(0, 6, m))
    beta = rng.standard_normal((n, 1)) + 2
    factors, _ = backfit_factors(data, beta, _factor_state(basis, 1, 1e8, rng), basis, 1.0, rng)
    f = factors.F[:, 0]
    X = np.column_stack([np.ones(m), basis.grid])
    fit, *_ = np.linalg.lstsq(X, f, rcond=None)
    assert np.linalg.norm(f - X @ fit) / np.linalg.norm(f) < 1e-3


def test_noiseless_subspace_recovery(rng):
    m, n, K = 40, 30, 3
    basis = build_spline_basis(np.arange(float(m)), 12)
    F_true = true_factors(m, K)
    beta_true = rng.standard_normal((n, K)) * [3.0, 2.0, 1.5] + [5.0, 0.0, 0.0]
    theta = beta_true @ F_true.T
    factors = _factor_state(basis, K, 1.0, rng)
    beta = theta @ factors.F
    for _ in range(500):
        factors, beta = backfit_factors(theta, beta, factors, basis, 0.01, rng)
        beta = theta @ factors.F
    assert np.max(subspace_angles(factors.F, F_true)) < 0.05
    np.testing.assert_allclose(factors.F.T @ factors.F, np.eye(K), atol=1e-10)


def test_backfit_compensates_reorthonormalisation(rng):
    m, n, K = 25, 10, 2
    basis = build_spline_basis(np.arange(float(m)), 8)
    factors = _factor_state(basis, K, 1.0, rng)
    beta = rng.standard_normal((n, K))
    data = beta @ factors.F.T + 0.1 * rng.standard_normal((n, m))
    new, beta_new = backfit_factors(data, beta, factors, basis, 0.1, rng)
    np.testing.assert_allclose(new.F.T @ new.F, np.eye(K), atol=1e-10)
    np.testing.assert_allclose(basis.B @ new.Psi, new.F, atol=1e-8)
    assert np.all(new.lambda_f > 0)


# --------------------------------------------------------------------------
# dynamic coefficients

def test_ffbs_independent_case_is_conjugate():
    n = 6
    y = np.linspace(-1, 2, n)[:, None]
    obs_var = np.full((n, 1), 0.5)
    mean = np.full((n, 1), 0.3)
    q = np.full((n, 1), 2.0)
    phi = np.zeros(1)
    post_var = 1 / (1 / 2.0 + 1 / 0.5)
    post_mean = post_var * (0.3 / 2.0 + y[:, 0] / 0.5)
    at_mean = _ffbs_kernel(y, obs_var, mean, phi, q, np.zeros((n, 1)))
    one_sd = _ffbs_kernel(y, obs_var, mean, phi, q, np.ones((n, 1)))
    np.testing.assert_allclose(at_mean[:, 0], post_mean, atol=1e-8)
    np.testing.assert_allclose((one_sd - at_mean)[:, 0] ** 2, post_var, atol=1e-8)


def test_ffbs_prior_limit(rng):
    dyn = DynamicCoefficients.initial(4, 1, mu=[1.5], phi=[0.6])
    y = np.full((4, 1), 50.0)
    draws = np.array([ffbs_coefficients(y, dyn, 1e4, rng)[:, 0] for _ in range(20_000)])
    sd = math.sqrt(1 / (1 - 0.36))
    assert np.all(np.abs(draws.mean(axis=0) - 1.5) < 4 * sd / math.sqrt(draws.shape[0]) + 0.01)


def test_ffbs_missing_observations_are_skipped(rng):
    dyn = DynamicCoefficients.initial(5, 2, mu=[0.0, 1.0], phi=[0.5, 0.5])
    y = np.full((5, 2), np.nan)
    draws = np.array([ffbs_coefficients(y, dyn, 0.1, rng) for _ in range(5000)])
    assert np.all(np.isfinite(draws))
    assert abs(draws[:, :, 1].mean() - 1.0) < 0.1


def test_ffbs_mse_against_dense_smoother():
    rng = np.random.default_rng(21)
    n, phi, q, s2 = 200, 0.8, 0.36, 0.5
    dyn = DynamicCoefficients.initial(n, 1, mu=[0.0], phi=[phi])
    dyn.delta_eta[:] = 1 / q
    truth = simulate_ar_paths(dyn, n, rng)
    y = truth + math.sqrt(s2) * rng.standard_normal((n, 1))
    draws = np.array([ffbs_coefficients(y, dyn, math.sqrt(s2), rng)[:, 0] for _ in range(3000)])
    oracle_mean, oracle_cov = gaussian_smoother(y[:, 0], 0.0, phi, q, s2)
    mse = np.mean((draws.mean(axis=0) - truth[:, 0]) ** 2)
    oracle_mse = np.mean((oracle_mean - truth[:, 0]) ** 2)
    assert mse <= 1.1 * oracle_mse
    np.testing.assert_allclose(draws.var(axis=0), np.diag(oracle_cov), rtol=0.15)


def test_ffbs_rejects_explosive_states(rng):
    dyn = DynamicCoefficients.initial(3, 1, phi=[1.0])
    with pytest.raises(InvalidStateError):
        ffbs_coefficients(np.zeros((3, 1)), dyn, 1.0, rng)


def _geweke_chain(steps, n, K, fix, rng):
    """Alternate paths | parameters and parameters | paths; the parameter marginal is the prior."""
    dyn = DynamicCoefficients.initial(n, K)
    if "a_eta2" in fix:
        dyn.a_eta[1] = 3.0
    phis, variances = np.empty((steps, K)), np.empty((steps, K))
    for t in range(steps):
        beta = simulate_ar_paths(dyn, n, rng)
        dyn = update_ar_params(beta, dyn, rng, fix=fix)
        phis[t], variances[t] = dyn.phi, dyn.sigma_eta ** 2
    return phis, variances


def test_prior_only_phi_mean():
    phis, _ = _geweke_chain(20_000, 2, 1, ("a_eta2",), np.random.default_rng(5))
    assert abs(phis[2000:, 0].mean() - 3 / 7) < 0.02


def test_prior_only_mgp_ordering():
    _, variances = _geweke_chain(10_000, 2, 4, ("a_eta2",), np.random.default_rng(6))
    means = np.median(variances[1000:], axis=0)
    assert np.all(np.diff(means) <= 0)


def test_phi_recovered_from_long_path():
    rng = np.random.default_rng(7)
    n = 200
    dyn = DynamicCoefficients.initial(n, 1, mu=[2.0], phi=[0.8])
    dyn.delta_eta[:] = 1 / 0.36
    beta = simulate_ar_paths(dyn, n, rng)
    state = DynamicCoefficients.initial(n, 1)
    phis = []
    for it in range(3000):
        state = update_ar_params(beta, state, rng)
        if it >= 500:
            phis.append(state.phi[0])
    assert abs(np.mean(phis) - 0.8) < 0.15


def test_ar_params_keep_support(rng):
    n, K = 30, 3
    dyn = DynamicCoefficients.initial(n, K)
    beta = rng.standard_normal((n, K))
    for _ in range(200):
        dyn = update_ar_params(beta, dyn, rng)
        assert np.all(np.abs(dyn.phi) < 1) and 2 <= dyn.nu_eta <= 128
        assert np.all(dyn.xi_eta > 0) and np.all(dyn.delta_eta > 0) and np.all(dyn.a_mu > 0)


# --------------------------------------------------------------------------
# covariance structure

def test_contemporaneous_plug_in():
    m = 9
    F = np.full((m, 1), 1 / math.sqrt(m))
    assert contemporaneous_cov(F, [[1.0]], 0.0, 1, 4) == pytest.approx(1 / m)
    assert contemporaneous_cov(F, [[1.0]], 0.3, 2, 2) - contemporaneous_cov(F, [[1.0]], 0.0, 2, 2) \
        == pytest.approx(0.09)
    M = contemporaneous_cov_matrix(F, [[1.0]], 0.3)
    assert M[2, 3] == pytest.approx(1 / m) and M[2, 2] == pytest.approx(1 / m + 0.09)


def test_lag_plug_in_and_decay():
    m = 9
    F = np.full((m, 1), 1 / math.sqrt(m))
    assert lag_cov_ar(F, 0.8, math.sqrt(0.36), 1, 3, 3) == pytest.approx(0.8 / m)
    vals = [lag_cov_ar(F, 0.8, 0.6, ell, 0, 5) for ell in range(1, 12)]
    np.testing.assert_allclose(np.array(vals[1:]) / vals[:-1], 0.8)
    with pytest.raises(ValueError):
        lag_cov_ar_matrix(F, 0.8, 0.6, 0)
