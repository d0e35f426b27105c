"""Negative-binomial kernels in the (r, theta) parameterisation.

A count ``z ~ NB(r, pi)`` with ``pi = exp(theta) / (r + exp(theta))`` has mean
``exp(theta)`` and variance ``exp(theta) * (1 + exp(theta) / r)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError
from .rng import as_generator


@dataclass(frozen=True)
class NBParams:
    r: float
    theta: float

    def __post_init__(self):
        _check(self.r, self.theta)

    @property
    def prob(self) -> float:
        """Success probability pi."""
        return float(np.exp(self.theta - np.logaddexp(np.log(self.r), self.theta)))


def _check(r, theta):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise InvalidParameterError("dispersion r must be finite and positive")
    if not np.all(np.isfinite(theta)):
        raise InvalidParameterError("theta must be finite")
    return r, theta


def nb_logpmf(z, r, theta):
    """Log pmf, vectorised over broadcastable ``z``, ``r``, ``theta``."""
    r, theta = _check(r, theta)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise InvalidParameterError("counts must be nonnegative")
    log_r = np.log(r)
    log_denom = np.logaddexp(log_r, theta)
    return (gammaln(r + z) - gammaln(r) - gammaln(z + 1.0)
            + z * (theta - log_denom) + r * (log_r - log_denom))


def nb_pmf(z, p: NBParams):
    return np.exp(nb_logpmf(z, p.r, p.theta))


def nb_moments(p: NBParams) -> tuple[float, float]:
    mean = float(np.exp(p.theta))
    return mean, mean * (1.0 + mean / p.r)


def sample_nb(r, theta, rng, size=None):
    """Gamma-mixed Poisson draw(s): lambda ~ Gamma(r, rate=r/exp(theta)), z ~ Poisson(lambda)."""
    r, theta = _check(r, theta)
    gen = as_generator(rng)
    lam = gen.gamma(r, np.exp(theta) / r, size=size)
    return gen.poisson(lam)
