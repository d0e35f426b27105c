"""Brute-force reference computations shared by several test modules."""
import numpy as np


def ar1_cov(n, phi, q):
    """Dense covariance of a stationary AR(1) path with innovation variance q."""
    idx = np.arange(n)
    return q / (1 - phi ** 2) * phi ** np.abs(idx[:, None] - idx[None, :])


def gaussian_smoother(y, mu, phi, q, obs_var):
    """Exact posterior mean and covariance of an AR(1) path observed with noise."""
    n = y.size
    S = ar1_cov(n, phi, q)
    G = S @ np.linalg.inv(S + obs_var * np.eye(n))
    mean = mu + G @ (y - mu)
    cov = S - G @ S
    return mean, cov


def simulate_ar_paths(dyn, n, rng):
    """(n, K) coefficient paths drawn from the AR(1) prior of ``dyn``."""
    K = dyn.mu.size
    q = dyn.innovation_var()
    out = np.empty((n, K))
    c = rng.standard_normal(K) * np.sqrt(q[0] / (1 - dyn.phi ** 2))
    out[0] = c
    for i in range(1, n):
        c = dyn.phi * c + rng.standard_normal(K) * np.sqrt(q[i])
        out[i] = c
    return out + dyn.mu
