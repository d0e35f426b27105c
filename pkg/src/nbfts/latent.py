"""Conditional updates for the latent Gaussian layer.

Conventions: ``theta`` and every (years x weeks) array are ``(n, m)``; the
factor matrix ``F`` is ``(m, K)``; dynamic coefficients ``beta`` are
``(n, K)`` so that the smooth surface is ``beta @ F.T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.special import gammaln

from .basis import SplineBasis, orthonormalize
from .errors import InvalidStateError
from .polyagamma import sample_polya_gamma
from .slice import slice_sample, slice_sample_bounded

PHI_PRIOR = (5.0, 2.0)
NU_BOUNDS = (2.0, 128.0)
MGP_HYPERPRIOR = (2.0, 1.0)
LAMBDA_F_PRIOR = (0.01, 0.01)
STATIONARY_FLOOR = 1e-6


# --------------------------------------------------------------------------
# Polya-Gamma layer

def compute_zpg(z, r, xi):
    """Working response (z - r) / (2 xi) + log r."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise InvalidStateError("Polya-Gamma auxiliaries must be positive")
    if np.any(np.asarray(r) <= 0):
        raise InvalidStateError("dispersion must be positive")
    return (np.asarray(z, dtype=float) - r) / (2.0 * xi) + np.log(r)


def update_xi(z, r, theta, rng):
    """xi ~ PG(z + r, theta - log r), elementwise.

    Draws with a tiny shape can underflow to zero; they are floored at the
    smallest normal double so the theta precision stays positive.
    """
    z = np.asarray(z, dtype=float)
    xi = sample_polya_gamma(z + r, np.asarray(theta, dtype=float) - math.log(r), rng)
    return np.maximum(xi, np.finfo(float).tiny)


def update_theta(z, r, xi, prior_mean, sigma_eps, rng):
    """Gaussian draw of theta given the PG working likelihood and its prior.

    ``prior_mean`` is the full prior location of theta, i.e. the smooth
    surface plus the log offset.
    """
    xi = np.asarray(xi, dtype=float)
    if sigma_eps <= 0 or np.any(xi <= 0):
        raise InvalidStateError("nonpositive precision in theta update")
    prior_prec = 1.0 / (sigma_eps * sigma_eps)
    prec = xi + prior_prec
    # xi * zpg == (z - r) / 2 + xi * log r
    lin = 0.5 * (np.asarray(z, dtype=float) - r) + xi * math.log(r) + prior_prec * np.asarray(prior_mean)
    draw = lin / prec + rng.standard_normal(np.shape(prec)) / np.sqrt(prec)
    return draw if np.ndim(draw) else float(draw)


# --------------------------------------------------------------------------
# Factors

@dataclass
class FactorMatrix:
    F: np.ndarray  # (m, K), orthonormal columns
    Psi: np.ndarray  # (L, K), F = B @ Psi
    lambda_f: np.ndarray  # (K,)

    def copy(self) -> "FactorMatrix":
        return FactorMatrix(self.F.copy(), self.Psi.copy(), self.lambda_f.copy())


def _constrained_gaussian(prec, lin, C, rng):
    """Draw from N(prec^-1 lin, prec^-1) conditioned on C x = 0."""
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(chol.T, np.linalg.solve(chol, lin))
    x = mean + np.linalg.solve(chol.T, rng.standard_normal(lin.size))
    if C is None or C.shape[0] == 0:
        return x
    cov_ct = np.linalg.solve(chol.T, np.linalg.solve(chol, C.T))
    return x - cov_ct @ np.linalg.solve(C @ cov_ct, C @ x)


def backfit_factors(resid, beta, factors: FactorMatrix, basis: SplineBasis, sigma_eps, rng):
    """One Bayesian backfitting sweep over the K factor curves.

    ``resid`` is the (n, m) Gaussian "data" with offsets removed, modelled as
    ``beta @ F.T + noise``. Each spline coefficient vector is drawn from its
    Gaussian full conditional given the partial residual, constrained to be
    orthogonal to the other current factors; the factor matrix is then
    re-orthonormalised and ``beta`` compensated so ``beta @ F.T`` is unchanged.

    Returns ``(factors, beta)`` with updated smoothing parameters.
    """
    B, Omega = basis.B, basis.Omega
    F = factors.F.copy()
    Psi = factors.Psi.copy()
    K = F.shape[1]
    s2 = sigma_eps * sigma_eps
    BtB = B.T @ B
    R = resid - beta @ F.T
    for k in range(K):
        bk = beta[:, k]
        partial = R + np.outer(bk, F[:, k])
        prec = (bk @ bk / s2) * BtB + factors.lambda_f[k] * Omega
        prec[np.diag_indices_from(prec)] += 1e-10
        lin = B.T @ (partial.T @ bk) / s2
        others = np.delete(F, k, axis=1)
        C = others.T @ B if K > 1 else None
        psi = _constrained_gaussian(prec, lin, C, rng)
        Psi[:, k] = psi
        F[:, k] = B @ psi
        R = partial - np.outer(bk, F[:, k])

    F, M = orthonormalize(F, return_transform=True)
    beta = beta @ M.T
    Psi = np.linalg.solve(M.T, Psi.T).T

    a, b = LAMBDA_F_PRIOR
    quad = np.einsum("lk,lj,jk->k", Psi, Omega, Psi)
    lam = rng.gamma(a + 0.5 * basis.penalty_rank, 1.0 / (b + 0.5 * quad))
    return FactorMatrix(F, Psi, lam), beta


# --------------------------------------------------------------------------
# Dynamic coefficients

@dataclass
class DynamicCoefficients:
    mu: np.ndarray  # (K,)
    phi: np.ndarray  # (K,)
    xi_eta: np.ndarray  # (n, K)
    nu_eta: float
    delta_mu: np.ndarray  # (K,)
    delta_eta: np.ndarray  # (K,)
    a_mu: np.ndarray = field(default_factory=lambda: np.array([2.0, 3.0]))
    a_eta: np.ndarray = field(default_factory=lambda: np.array([2.0, 3.0]))

    @property
    def sigma_eta(self) -> np.ndarray:
        return 1.0 / np.sqrt(np.cumprod(self.delta_eta))

    @property
    def sigma_mu(self) -> np.ndarray:
        return 1.0 / np.sqrt(np.cumprod(self.delta_mu))

    @classmethod
    def initial(cls, n, K, mu=None, phi=None, nu_eta=10.0):
        return cls(
            mu=np.zeros(K) if mu is None else np.asarray(mu, dtype=float).copy(),
            phi=np.full(K, 0.5) if phi is None else np.asarray(phi, dtype=float).copy(),
            xi_eta=np.ones((n, K)),
            nu_eta=float(nu_eta),
            delta_mu=np.ones(K),
            delta_eta=np.ones(K),
        )

    def copy(self) -> "DynamicCoefficients":
        return replace(self, mu=self.mu.copy(), phi=self.phi.copy(), xi_eta=self.xi_eta.copy(),
                       delta_mu=self.delta_mu.copy(), delta_eta=self.delta_eta.copy(),
                       a_mu=self.a_mu.copy(), a_eta=self.a_eta.copy())

    def innovation_var(self) -> np.ndarray:
        """(n, K) innovation variances sigma_eta_k^2 / xi_eta_{k,i}."""
        return self.sigma_eta[None, :] ** 2 / self.xi_eta


def stationary_scale(phi):
    return np.maximum(1.0 - np.asarray(phi) ** 2, STATIONARY_FLOOR)


@numba.njit(cache=True)
def _ffbs_kernel(y, obs_var, mean, phi, q, normals):
    n, K = y.shape
    out = np.empty((n, K))
    af = np.empty(n)
    pf = np.empty(n)
    for k in range(K):
        ph = phi[k]
        a = 0.0
        p = q[0, k] / max(1.0 - ph * ph, 1e-6)
        for i in range(n):
            if i > 0:
                a = ph * af[i - 1]
                p = ph * ph * pf[i - 1] + q[i, k]
            v = obs_var[i, k]
            obs = y[i, k] - mean[i, k]
            if math.isfinite(obs) and math.isfinite(v):
                gain = p / (p + v)
                af[i] = a + gain * (obs - a)
                pf[i] = p * (1.0 - gain)
            else:
                af[i] = a
                pf[i] = p
        c = af[n - 1] + math.sqrt(max(pf[n - 1], 0.0)) * normals[n - 1, k]
        out[n - 1, k] = c
        for i in range(n - 2, -1, -1):
            pred = ph * ph * pf[i] + q[i + 1, k]
            j = pf[i] * ph / pred
            m_s = af[i] + j * (c - ph * af[i])
            v_s = pf[i] - j * ph * pf[i]
            c = m_s + math.sqrt(max(v_s, 0.0)) * normals[i, k]
            out[i, k] = c
    return out + mean


def ffbs_coefficients(y, dyn: DynamicCoefficients, sigma_eps, rng, mean=None, obs_var=None):
    """Joint draw of the (n, K) coefficient paths given projected observations.

    Observation model ``y[i, k] = beta[i, k] + N(0, sigma_eps^2)``; state model
    ``beta[i] - m[i] = phi * (beta[i-1] - m[i-1]) + N(0, sigma_eta^2 / xi_eta)``
    with the first state at its stationary distribution. ``m`` defaults to
    ``dyn.mu`` and may be a full (n, K) path (regression means). NaN
    observations are treated as missing. ``obs_var`` overrides
    ``sigma_eps**2`` elementwise.
    """
    y = np.asarray(y, dtype=float)
    n, K = y.shape
    q = dyn.innovation_var()
    if np.any(~(q > 0)) or (obs_var is None and not sigma_eps > 0):
        raise InvalidStateError("variances in the state space model must be positive")
    if np.any(np.abs(dyn.phi) >= 1):
        raise InvalidStateError("autoregressive coefficients must satisfy |phi| < 1")
    if obs_var is None:
        obs_var = np.full((n, K), float(sigma_eps) ** 2)
    else:
        obs_var = np.ascontiguousarray(np.broadcast_to(np.asarray(obs_var, dtype=float), (n, K)))
    m = np.broadcast_to(dyn.mu if mean is None else np.asarray(mean, dtype=float), (n, K))
    normals = rng.standard_normal((n, K))
    return _ffbs_kernel(np.ascontiguousarray(y), obs_var, np.ascontiguousarray(m, dtype=float),
                        np.ascontiguousarray(dyn.phi, dtype=float), np.ascontiguousarray(q), normals)


def innovations(centered, phi):
    """Scaled innovations: first row times sqrt(1 - phi^2), then c_i - phi c_{i-1}."""
    e = np.empty_like(centered)
    e[0] = centered[0] * np.sqrt(stationary_scale(phi))
    e[1:] = centered[1:] - phi * centered[:-1]
    return e


def _phi_logpost(a_phi, b_phi, s_first, s_cur, s_cross, s_lag, var):
    def logp(ph):
        one_m = 1.0 - ph * ph
        if one_m <= 0.0:
            return -math.inf
        quad = one_m * s_first + s_cur - 2.0 * ph * s_cross + ph * ph * s_lag
        return ((a_phi - 1.0) * math.log1p(ph) + (b_phi - 1.0) * math.log1p(-ph)
                + 0.5 * math.log(max(one_m, STATIONARY_FLOOR)) - 0.5 * quad / var)
    return logp


def _mgp_update(delta, a, sq, counts, rng):
    """Sequential Gamma updates of multiplicative-gamma-process increments.

    ``sq[k]`` is the sum of squared (locally scaled) terms whose precision is
    ``prod_{l<=k} delta_l`` and ``counts[k]`` the number of such terms.
    """
    delta = delta.copy()
    K = delta.size
    for h in range(K):
        tau = np.cumprod(delta)
        shape = (a[0] if h == 0 else a[1]) + 0.5 * counts[h:].sum()
        rate = 1.0 + 0.5 * np.sum(tau[h:] / delta[h] * sq[h:])
        delta[h] = rng.gamma(shape, 1.0 / rate)
    return delta


def _mgp_shape_logpost(log_deltas):
    n_terms = len(log_deltas)
    total = float(np.sum(log_deltas))
    shape_prior, rate_prior = MGP_HYPERPRIOR

    def logp(a):
        return (a - 1.0) * total - n_terms * math.lgamma(a) + (shape_prior - 1.0) * math.log(a) - rate_prior * a
    return logp


def update_ar_params(beta, dyn: DynamicCoefficients, rng, mean_offset=None, fix=(),
                     phi_prior=PHI_PRIOR):
    """Draw the AR(1) and shrinkage parameters given coefficient paths.

    Updates, in order: mu_k (conjugate), phi_k (slice on (-1, 1)), the local
    scales xi_eta (conjugate), nu_eta (slice on [2, 128]), the MGP increments for
    the innovation and mean variances (conjugate) and the four MGP shape
    hyperparameters (slice on the log scale). ``mean_offset`` is an (n, K)
    path added to mu_k (regression terms). Names in ``fix`` (``"a_mu1"``,
    ``"a_mu2"``, ``"a_eta1"``, ``"a_eta2"``, ``"nu_eta"``, ``"phi"``, ``"mu"``)
    are held at their current values.
    """
    new = dyn.copy()
    beta = np.asarray(beta, dtype=float)
    n, K = beta.shape
    base = beta if mean_offset is None else beta - mean_offset
    if np.any(np.abs(new.phi) >= 1):
        raise InvalidStateError("autoregressive coefficients must satisfy |phi| < 1")

    var_eta = new.sigma_eta ** 2
    if "mu" not in fix:
        phi = new.phi
        w = new.xi_eta / var_eta
        st = stationary_scale(phi)
        prec = st * w[0] + ((1 - phi) ** 2 * w[1:]).sum(axis=0) + 1.0 / new.sigma_mu ** 2
        lin = st * w[0] * base[0] + ((1 - phi) * w[1:] * (base[1:] - phi * base[:-1])).sum(axis=0)
        new.mu = lin / prec + rng.standard_normal(K) / np.sqrt(prec)

    d = base - new.mu
    if "phi" not in fix:
        w = new.xi_eta
        for k in range(K):
            dk, wk = d[:, k], w[:, k]
            logp = _phi_logpost(phi_prior[0], phi_prior[1], wk[0] * dk[0] ** 2,
                                float(np.sum(wk[1:] * dk[1:] ** 2)),
                                float(np.sum(wk[1:] * dk[1:] * dk[:-1])),
                                float(np.sum(wk[1:] * dk[:-1] ** 2)), var_eta[k])
            new.phi[k] = slice_sample_bounded(logp, float(new.phi[k]), -1.0, 1.0, 0.5, rng)

    e = innovations(d, new.phi)
    nu = new.nu_eta
    new.xi_eta = rng.gamma(0.5 * (nu + 1.0), 1.0 / (0.5 * (nu + e ** 2 / var_eta)))

    if "nu_eta" not in fix:
        n_terms = new.xi_eta.size
        s_log = float(np.sum(np.log(new.xi_eta)))
        s_lin = float(np.sum(new.xi_eta))

        def logp_nu(v):
            h = 0.5 * v
            return n_terms * (h * math.log(h) - math.lgamma(h)) + (h - 1.0) * s_log - h * s_lin
        new.nu_eta = slice_sample_bounded(logp_nu, nu, NU_BOUNDS[0], NU_BOUNDS[1], 10.0, rng)

    sq_eta = np.sum(new.xi_eta * e ** 2, axis=0)
    new.delta_eta = _mgp_update(new.delta_eta, new.a_eta, sq_eta, np.full(K, float(n)), rng)
    new.delta_mu = _mgp_update(new.delta_mu, new.a_mu, new.mu ** 2, np.ones(K), rng)

    for name, vec, deltas in (("a_mu", new.a_mu, new.delta_mu), ("a_eta", new.a_eta, new.delta_eta)):
        logd = np.log(deltas)
        if f"{name}1" not in fix:
            vec[0] = slice_sample(_mgp_shape_logpost(logd[:1]), float(vec[0]), 1.0, rng)
        if f"{name}2" not in fix:
            vec[1] = slice_sample(_mgp_shape_logpost(logd[1:]), float(vec[1]), 1.0, rng)
    return new


# --------------------------------------------------------------------------
# Covariance structure of the latent process

def contemporaneous_cov(F, cov_beta, sigma_eps, tau_idx, u_idx):
    """Cov[theta_i(tau), theta_i(u)] = f(tau)' Cov(beta) f(u) + 1{tau = u} sigma_eps^2."""
    F = np.asarray(F, dtype=float)
    value = float(F[tau_idx] @ np.asarray(cov_beta, dtype=float) @ F[u_idx])
    if tau_idx == u_idx:
        value += sigma_eps ** 2
    return value


def contemporaneous_cov_matrix(F, cov_beta, sigma_eps):
    F = np.asarray(F, dtype=float)
    return F @ np.asarray(cov_beta, dtype=float) @ F.T + sigma_eps ** 2 * np.eye(F.shape[0])


def lag_cov_ar(F, phi, sigma_eta, ell, tau_idx, u_idx):
    """Lag-ell autocovariance under independent stationary AR(1) coefficients."""
    return float(lag_cov_ar_matrix(F, phi, sigma_eta, ell)[tau_idx, u_idx])


def lag_cov_ar_matrix(F, phi, sigma_eta, ell):
    if ell < 1:
        raise ValueError("lag must be at least 1")
    F = np.asarray(F, dtype=float)
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    sigma_eta = np.atleast_1d(np.asarray(sigma_eta, dtype=float))
    if np.any(np.abs(phi) >= 1):
        raise InvalidStateError("autoregressive coefficients must satisfy |phi| < 1")
    weights = phi ** ell * sigma_eta ** 2 / (1.0 - phi ** 2)
    return (F * weights) @ F.T


def stationary_cov_beta(phi, sigma_eta):
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return np.diag(np.atleast_1d(sigma_eta) ** 2 / (1.0 - phi ** 2))


def nb_loglik_dispersion(z, theta):
    """Log-likelihood of the dispersion r given counts and theta, as a callable."""
    z = np.asarray(z, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    values, counts = np.unique(z, return_counts=True)
    z_theta = float(theta @ z)

    def loglik(r):
        log_r = math.log(r)
        log_denom = np.logaddexp(log_r, theta)
        return (float(counts @ (gammaln(values + r) - math.lgamma(r)))
                + z_theta - float((z + r) @ log_denom) + z.size * r * log_r)
    return loglik
