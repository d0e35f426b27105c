"""Synthetic count panels with known latent structure.

Curves are built from four orthonormal factors on an equally spaced grid
(a constant and the discrete orthogonal polynomials of degree 2, 3 and 4),
with AR(1) dynamic coefficients, Gaussian noise scaled to a root
signal-to-noise ratio, and negative-binomial counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .forecast import ForecastTask
from .negbin import sample_nb
from .panel import CountPanel
from .rng import RngHandle

MAX_MASK_TRIES = 1000


@dataclass(frozen=True)
class SimConfig:
    n: int = 50
    m: int = 50
    K_true: int = 4
    phi_true: float = 0.8
    rsnr: float = 10.0
    missing_frac: float = 0.10
    r: float = 1000.0
    seed: int = 0
    m0: int = 30
    innovation_sd: bool = True  # sqrt(1 - phi^2) is the innovation sd; False treats it as the variance

    def __post_init__(self):
        if self.n < 2 or self.m < 5 or self.K_true < 1:
            raise InvalidParameterError("need n >= 2, m >= 5 and K_true >= 1")
        if not abs(self.phi_true) < 1:
            raise InvalidParameterError("phi_true must lie in (-1, 1)")
        if not (self.rsnr > 0 and self.r > 0):
            raise InvalidParameterError("rsnr and r must be positive")
        if not 0 <= self.missing_frac < 1:
            raise InvalidParameterError("missing_frac must lie in [0, 1)")
        if not 1 <= self.m0 < self.m:
            raise InvalidParameterError("m0 must lie in [1, m)")


@dataclass
class SimTruth:
    theta_star: np.ndarray  # (n, m)
    mu_star: np.ndarray  # (n, m)
    true_curves: np.ndarray  # exp(mu*) exp(sigma*^2 / 2)
    f_star: np.ndarray  # (m, K_true)
    beta_star: np.ndarray  # (n, K_true)
    sigma_star: float
    complete_counts: np.ndarray  # counts before deletion
    deleted: np.ndarray  # (n, m) bool


def true_factors(m, K=4):
    """Constant column plus discrete orthonormal polynomials of degree 2..K."""
    tau = np.linspace(0.0, 1.0, m)
    V = np.vander(tau - 0.5, K + 1, increasing=True)
    Q, _ = np.linalg.qr(V)
    F = Q[:, [0] + list(range(2, K + 1))][:, :K]
    F *= np.sign(F[-1])  # positive at tau = 1, as for Legendre polynomials
    F[:, 0] = 1.0 / math.sqrt(m)
    return F


def _deletion_mask(cfg: SimConfig, rng):
    n, m = cfg.n, cfg.m
    n_del = int(round(cfg.missing_frac * n * m))
    for _ in range(MAX_MASK_TRIES):
        mask = np.zeros(n * m, dtype=bool)
        mask[rng.choice(n * m, size=n_del, replace=False)] = True
        mask = mask.reshape(n, m)
        # keep every year and week partly observed and the first m0 weeks of the last year intact
        if mask.all(axis=1).any() or mask.all(axis=0).any() or mask[-1, :cfg.m0].any():
            continue
        return mask
    raise InvalidParameterError("could not draw a deletion mask satisfying the task constraints")


def simulate(cfg: SimConfig) -> tuple[CountPanel, SimTruth]:
    rng = RngHandle(cfg.seed).generator()
    n, m, K = cfg.n, cfg.m, cfg.K_true
    F = true_factors(m, K)
    phi = cfg.phi_true
    scale = math.sqrt(1.0 - phi * phi)
    innov_sd = scale if cfg.innovation_sd else math.sqrt(scale)
    stat_sd = innov_sd / scale
    gamma = np.empty((n, K))
    prev = stat_sd * rng.standard_normal(K)
    for i in range(n):
        prev = phi * prev + innov_sd * rng.standard_normal(K)
        gamma[i] = prev
    root_m = math.sqrt(m)
    beta = root_m + (root_m / np.arange(1, K + 1)) * gamma
    mu = beta @ F.T
    sigma = float(np.std(mu)) / cfg.rsnr
    theta = mu + sigma * rng.standard_normal((n, m))
    counts = sample_nb(cfg.r, theta, rng)
    deleted = _deletion_mask(cfg, rng)
    panel = CountPanel(counts, deleted, np.ones((n, m)))
    truth = SimTruth(theta_star=theta, mu_star=mu, true_curves=np.exp(mu) * math.exp(0.5 * sigma * sigma),
                     f_star=F, beta_star=beta, sigma_star=sigma, complete_counts=counts, deleted=deleted)
    return panel, truth


def forecast_task_for_sim(panel: CountPanel, m0: int = 30, level: float = 0.95, task_id="sim") -> ForecastTask:
    """Forecast the last year's weeks after ``m0`` from everything before them."""
    n = panel.shape[0]
    return ForecastTask(train_years=tuple(range(n - 1)), target_year=n - 1, m0=m0, level=level, task_id=task_id)
