"""Polya-Gamma PG(b, c) sampling.

Three regimes, chosen per draw by the shape ``b``:

* ``b <= EXACT_MAX``: ``floor(b)`` exact PG(1, c) draws (Devroye-type
  alternating-series rejection) summed, plus the fractional remainder drawn
  from the infinite-convolution representation truncated at ``SERIES_TERMS``
  gamma variables (the leading ``EXACT_TERMS`` drawn individually, the rest
  replaced by one moment-matched gamma) and rescaled to the exact mean;
* ``EXACT_MAX < b <= GAUSS_THRESHOLD``: the same truncated series for all of b;
* ``b > GAUSS_THRESHOLD``: a Gaussian with the exact PG mean and variance.

The kernels are numba-compiled and consume a ``numpy.random.Generator``
directly, so a given generator state always yields the same draws.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import InvalidParameterError
from .rng import as_generator

GAUSS_THRESHOLD = 170.0
EXACT_MAX = 64.0
SERIES_TERMS = 200
EXACT_TERMS = 12

_TRUNC = 0.64
_PI = math.pi
_PI2 = math.pi * math.pi


@numba.njit(cache=True)
def _log_norm_cdf(x):
    v = 0.5 * math.erfc(-x / math.sqrt(2.0))
    if v <= 0.0:
        return -math.inf
    return math.log(v)


@numba.njit(cache=True)
def _series_coef(n, x):
    # n-th term of the alternating series for the J*(1, 0) density
    k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (math.log(0.5 * _PI) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return math.exp(expnt)
    return 0.0


@numba.njit(cache=True)
def _mass_texpon(z):
    t = _TRUNC
    fz = 0.125 * _PI2 + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(z, rng):
    # inverse-Gaussian(1/z, 1) truncated to (0, TRUNC)
    t = _TRUNC
    x = t + 1.0
    if 1.0 / t > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _pg1(c, rng):
    """Exact PG(1, c)."""
    z = abs(c) * 0.5
    return _pg1_prepared(z, 0.125 * _PI2 + 0.5 * z * z, _mass_texpon(z), rng)


@numba.njit(cache=True)
def _pg1_prepared(z, fz, p_exp, rng):
    while True:
        if rng.random() < p_exp:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _pg_mean(b, c):
    h = 0.5 * abs(c)
    if h < 1e-6:
        return 0.25 * b * (1.0 - h * h / 3.0)
    return 0.25 * b * math.tanh(h) / h


@numba.njit(cache=True)
def _pg_var(b, c):
    c = abs(c)
    if c < 1e-3:
        c2 = c * c
        return b * (1.0 / 24.0 - c2 / 240.0 + 17.0 * c2 * c2 / 40320.0)
    h = 0.5 * c
    sech = 1.0 / math.cosh(h) if h < 350.0 else 0.0
    return b / (4.0 * c * c * c) * (2.0 * math.tanh(h) - c * sech * sech)


@numba.njit(cache=True)
def _pg_series(b, c, rng):
    # sum of SERIES_TERMS weighted gammas: the first EXACT_TERMS drawn one by one,
    # the rest collapsed into one moment-matched gamma; rescaled to the exact mean
    cc = c * c / (4.0 * _PI2)
    acc = 0.0
    s1 = 0.0
    for k in range(1, EXACT_TERMS + 1):
        d = (k - 0.5) * (k - 0.5) + cc
        acc += rng.standard_gamma(b) / d
        s1 += 1.0 / d
    t1 = 0.0
    t2 = 0.0
    for k in range(EXACT_TERMS + 1, SERIES_TERMS + 1):
        w = 1.0 / ((k - 0.5) * (k - 0.5) + cc)
        t1 += w
        t2 += w * w
    # tail ~ sum_k w_k g_k with g_k ~ Gamma(b, 1): mean b*t1, variance b*t2
    shape = b * t1 * t1 / t2
    acc += rng.standard_gamma(shape) * (t2 / t1)
    truncated_mean = b * (s1 + t1) / (2.0 * _PI2)
    return acc / (2.0 * _PI2) * _pg_mean(b, c) / truncated_mean


@numba.njit(cache=True)
def _pg_draw(b, c, rng):
    if b > GAUSS_THRESHOLD:
        m = _pg_mean(b, c)
        v = _pg_var(b, c)
        x = m + math.sqrt(v) * rng.standard_normal()
        return max(x, 1e-12 * m)
    if b > EXACT_MAX:
        return _pg_series(b, c, rng)
    n = int(math.floor(b))
    frac = b - n
    x = 0.0
    if n > 0:
        z = abs(c) * 0.5
        fz = 0.125 * _PI2 + 0.5 * z * z
        p_exp = _mass_texpon(z)
        for _ in range(n):
            x += _pg1_prepared(z, fz, p_exp, rng)
    if frac > 1e-12:
        x += _pg_series(frac, c, rng)
    return x


@numba.njit(cache=True)
def _pg_fill(b, c, rng, out):
    for i in range(out.size):
        out[i] = _pg_draw(b[i], c[i], rng)
    return out


def sample_polya_gamma(b, c, rng, size=None):
    """Draw PG(b, c) variates.

    ``b`` and ``c`` broadcast against each other (and against ``size`` when
    given). Returns a float for scalar input, otherwise an array.
    """
    b_arr = np.asarray(b, dtype=np.float64)
    c_arr = np.asarray(c, dtype=np.float64)
    if np.any(~np.isfinite(b_arr)) or np.any(b_arr <= 0):
        raise InvalidParameterError("Polya-Gamma shape b must be finite and positive")
    if np.any(~np.isfinite(c_arr)):
        raise InvalidParameterError("Polya-Gamma tilt c must be finite")
    shape = np.broadcast_shapes(b_arr.shape, c_arr.shape) if size is None else (
        (size,) if np.isscalar(size) else tuple(size))
    bb = np.ascontiguousarray(np.broadcast_to(b_arr, shape)).ravel()
    cb = np.ascontiguousarray(np.broadcast_to(c_arr, shape)).ravel()
    out = _pg_fill(bb, cb, as_generator(rng), np.empty(bb.size))
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def pg_mean(b, c):
    """E[PG(b, c)] = b/(2c) tanh(c/2)."""
    c = np.abs(np.asarray(c, dtype=float))
    h = 0.5 * c
    safe = np.where(h < 1e-6, 1.0, h)
    return np.where(h < 1e-6, 0.25 * np.asarray(b, dtype=float) * (1 - h * h / 3), 0.25 * b * np.tanh(safe) / safe)


def pg_var(b, c):
    return np.vectorize(_pg_var, otypes=[float])(np.asarray(b, dtype=float), np.asarray(c, dtype=float))
