"""Regression of the dynamic coefficients on yearly predictors.

``beta[i, k] = mu_k + x_i @ alpha[:, k] + gamma[i, k]`` with ``gamma`` an AR(1)
process sharing the innovation model of the plain dynamic coefficients.
Coefficients carry nested horseshoe priors

    alpha_jk ~ N(0, s_jk^2),  s_jk ~ C+(0, lam_j),  lam_j ~ C+(0, lam_0),
    lam_0 ~ C+(0, 1/sqrt(p)),

each half-Cauchy written as a scale mixture of inverse-gammas so every scale
update is conjugate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .latent import DynamicCoefficients, stationary_scale


@dataclass
class RegressionBlock:
    X: np.ndarray  # (n, p)
    alpha: np.ndarray  # (p, K)
    hs_local: np.ndarray  # (p, K) scales s_jk
    hs_mid: np.ndarray  # (p,) scales lam_j
    hs_global: float  # lam_0
    aux_local: np.ndarray  # (p, K)
    aux_mid: np.ndarray  # (p,)
    aux_global: float

    @classmethod
    def initial(cls, X, K):
        X = np.asarray(X, dtype=float)
        p = X.shape[1]
        return cls(X=X, alpha=np.zeros((p, K)), hs_local=np.ones((p, K)), hs_mid=np.ones(p),
                   hs_global=1.0, aux_local=np.ones((p, K)), aux_mid=np.ones(p), aux_global=1.0)

    def mean_path(self) -> np.ndarray:
        """(n, K) regression contribution ``X @ alpha``."""
        return self.X @ self.alpha

    def residual_process(self, beta, mu) -> np.ndarray:
        """Autoregressive errors gamma = beta - mu - X alpha."""
        return beta - mu - self.mean_path()


def _inv_gamma(shape, scale, rng):
    return scale / rng.gamma(shape, 1.0, size=np.shape(scale))


def update_regression(beta, reg: RegressionBlock, dyn: DynamicCoefficients, rng) -> RegressionBlock:
    """Gibbs update of alpha and the horseshoe scales given the coefficient paths."""
    X = reg.X
    n, p = X.shape
    K = beta.shape[1]
    if beta.shape[0] != n:
        raise ValueError(f"design has {n} rows but coefficients have {beta.shape[0]}")

    alpha = np.empty((p, K))
    st = np.sqrt(stationary_scale(dyn.phi))
    weights = dyn.xi_eta / dyn.sigma_eta ** 2
    centered = beta - dyn.mu
    for k in range(K):
        ph = dyn.phi[k]
        y_w = np.r_[st[k] * centered[0, k], centered[1:, k] - ph * centered[:-1, k]]
        X_w = np.vstack([st[k] * X[:1], X[1:] - ph * X[:-1]])
        w = weights[:, k]
        prec = (X_w.T * w) @ X_w + np.diag(1.0 / reg.hs_local[:, k] ** 2)
        lin = X_w.T @ (w * y_w)
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(chol.T, np.linalg.solve(chol, lin))
        alpha[:, k] = mean + np.linalg.solve(chol.T, rng.standard_normal(p))

    local_var = _inv_gamma(1.0, 1.0 / reg.aux_local + 0.5 * alpha ** 2, rng)
    mid_var = reg.hs_mid ** 2
    aux_local = _inv_gamma(1.0, 1.0 / mid_var[:, None] + 1.0 / local_var, rng)
    mid_var = _inv_gamma(0.5 * (K + 1), 1.0 / reg.aux_mid + np.sum(1.0 / aux_local, axis=1), rng)
    global_var = reg.hs_global ** 2
    aux_mid = _inv_gamma(1.0, 1.0 / global_var + 1.0 / mid_var, rng)
    global_var = float(_inv_gamma(0.5 * (p + 1), 1.0 / reg.aux_global + np.sum(1.0 / aux_mid), rng))
    aux_global = float(_inv_gamma(1.0, p + 1.0 / global_var, rng))

    return RegressionBlock(X=X, alpha=alpha, hs_local=np.sqrt(local_var), hs_mid=np.sqrt(mid_var),
                           hs_global=float(np.sqrt(global_var)), aux_local=aux_local,
                           aux_mid=aux_mid, aux_global=aux_global)
