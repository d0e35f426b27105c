"""Gibbs sampler for count functional time series.

One iteration of the NB / Poisson variants:

1. impute unobserved counts from NB(r, theta);
2. slice-sample the dispersion r under a half-Cauchy(0, 10) prior
   (skipped when r is fixed);
3. Polya-Gamma auxiliaries xi ~ PG(z + r, theta - log r);
4. theta from its conditional Gaussian;
5. the Gaussian functional-data block: factor backfitting, FFBS for the
   dynamic coefficients (with regression terms when a design is given),
   AR / shrinkage parameters and sigma_eps^2 ~ IG(0.01, 0.01).

The Gaussian variant runs step 5 alone on Y = sqrt(Z / E).
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .basis import SplineBasis, build_spline_basis, orthonormalize, project_to_basis
from .errors import DegenerateBasisError, InvalidInputError, InvalidParameterError
from .latent import (DynamicCoefficients, FactorMatrix, backfit_factors, ffbs_coefficients,
                     nb_loglik_dispersion, update_ar_params, update_theta, update_xi)
from .negbin import sample_nb
from .panel import CountPanel
from .regression import RegressionBlock, update_regression
from .rng import RngHandle
from .slice import slice_sample

log = logging.getLogger(__name__)

VARIANTS = ("nb", "pois", "gauss")
POIS_R = 1000.0
R_PRIOR_SCALE = 10.0
R_INIT = 5.0
SIGMA_PRIOR = (0.01, 0.01)


@dataclass
class FitConfig:
    K: int = 6
    iterations: int = 30000
    burn_in: int = 5000
    thin: int = 5
    variant: str = "nb"
    r_fixed: float | None = None
    L_m: int | None = None
    seed: int = 0
    design: np.ndarray | None = None  # (n, p) yearly predictors
    r_init: float = R_INIT
    fix: tuple = ()  # AR / shrinkage parameters held fixed, see update_ar_params

    def __post_init__(self):
        self.variant = str(self.variant).lower()
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.K < 1:
            raise InvalidParameterError("K must be at least 1")
        if self.thin < 1:
            raise InvalidParameterError("thin must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise InvalidParameterError("need 0 <= burn_in < iterations")
        if self.variant == "pois" and self.r_fixed is None:
            self.r_fixed = POIS_R
        if self.r_fixed is not None and not self.r_fixed > 0:
            raise InvalidParameterError("r_fixed must be positive")
        if not self.r_init > 0:
            raise InvalidParameterError("r_init must be positive")
        self.fix = tuple(self.fix)

    @property
    def n_saved(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["design"] = None if self.design is None else np.asarray(self.design).tolist()
        d["fix"] = list(self.fix)
        return d

    @classmethod
    def from_dict(cls, d) -> "FitConfig":
        d = dict(d)
        if d.get("design") is not None:
            d["design"] = np.asarray(d["design"], dtype=float)
        d["fix"] = tuple(d.get("fix", ()))
        return cls(**d)


@dataclass
class ModelState:
    Z: np.ndarray  # (n, m) counts with missing cells imputed
    theta: np.ndarray  # (n, m), includes the log offset (Y itself for the Gaussian variant)
    xi: np.ndarray | None
    r: float
    factors: FactorMatrix
    beta: np.ndarray  # (n, K)
    dyn: DynamicCoefficients
    sigma_eps: float
    reg: RegressionBlock | None = None


# parameters persisted per saved draw
SNAPSHOT_FIELDS = ("r", "sigma_eps", "nu_eta", "F", "beta", "mu", "phi", "sigma_eta", "lambda_f")


@dataclass
class DrawStore:
    config: FitConfig
    panel: CountPanel
    draws: dict = field(default_factory=dict)  # name -> (S, ...) array
    predictive: np.ndarray | None = None  # (S, n, m)

    @property
    def n_draws(self) -> int:
        return 0 if self.predictive is None else self.predictive.shape[0]

    def state(self, s: int) -> dict:
        """Parameters of the s-th stored draw."""
        return {k: v[s] for k, v in self.draws.items()}

    def states(self):
        return [self.state(s) for s in range(self.n_draws)]


# --------------------------------------------------------------------------
# set-up

def _set_threads():
    cap = os.environ.get("NBFTS_THREADS")
    if cap:
        try:
            numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            raise InvalidParameterError(f"NBFTS_THREADS must be an integer, got {cap!r}") from None


def _check_panel(panel: CountPanel, cfg: FitConfig):
    n, m = panel.shape
    observed_rows = np.sum(~panel.missing.all(axis=1))
    if n < 2 or observed_rows < 2:
        raise InvalidInputError("need at least two (partially) observed years")
    empty_cols = np.flatnonzero(panel.missing.all(axis=0))
    if empty_cols.size:
        raise InvalidInputError(f"week column(s) {[panel.week_labels[j] for j in empty_cols]} have no observations")
    if np.any(~(panel.offsets > 0)):
        raise InvalidInputError("offsets must be positive")
    if cfg.K > min(n, m):
        raise InvalidParameterError(f"K={cfg.K} exceeds min(n, m)={min(n, m)}")
    if cfg.design is not None:
        X = np.asarray(cfg.design)
        if X.ndim != 2 or X.shape[0] != n:
            raise InvalidInputError(f"design must have {n} rows, got shape {X.shape}")


def gauss_response(counts, offsets):
    """Square-root rate Y = sqrt(Z / E) modelled by the Gaussian variant."""
    return np.sqrt(np.asarray(counts, dtype=float) / np.asarray(offsets, dtype=float))


def gauss_counts(y, offsets):
    """Back-transform E * max(Y, 0)^2; negative draws map to zero."""
    return np.asarray(offsets, dtype=float) * np.maximum(np.asarray(y, dtype=float), 0.0) ** 2


def _fill_columns(values, missing):
    out = values.copy()
    col_mean = np.nanmean(np.where(missing, np.nan, values), axis=0)
    rows, cols = np.nonzero(missing)
    out[rows, cols] = col_mean[cols]
    return out


def _initial_state(panel: CountPanel, cfg: FitConfig, basis: SplineBasis, gaussian: bool) -> ModelState:
    n, m = panel.shape
    log_e = np.log(panel.offsets)
    if gaussian:
        surface = _fill_columns(gauss_response(panel.counts, panel.offsets), panel.missing)
        theta = surface
    else:
        theta = _fill_columns(np.log((panel.counts + 1.0) / panel.offsets), panel.missing) + log_e
        surface = theta - log_e
    # leading right singular vectors of the (uncentered) warm-start surface;
    # the first one carries the mean curve
    _, _, vt = np.linalg.svd(surface, full_matrices=False)
    Psi = project_to_basis(vt[: cfg.K].T, basis)
    try:
        F, M = orthonormalize(basis.B @ Psi, return_transform=True)
    except DegenerateBasisError:
        # flat warm start (e.g. all-zero counts): start from the spline columns themselves
        Psi = np.eye(basis.size)[:, : cfg.K]
        F, M = orthonormalize(basis.B @ Psi, return_transform=True)
    Psi = np.linalg.solve(M.T, Psi.T).T
    factors = FactorMatrix(F=F, Psi=Psi, lambda_f=np.ones(cfg.K))
    beta = surface @ F
    sigma_eps = float(np.std(surface - beta @ F.T))
    sigma_eps = max(sigma_eps, 1e-3)
    dyn = DynamicCoefficients.initial(n, cfg.K, mu=beta.mean(axis=0))
    reg = None if cfg.design is None else RegressionBlock.initial(cfg.design, cfg.K)
    r = cfg.r_fixed if cfg.r_fixed is not None else cfg.r_init
    return ModelState(Z=panel.counts.copy(), theta=theta, xi=None, r=float(r), factors=factors,
                      beta=beta, dyn=dyn, sigma_eps=sigma_eps, reg=reg)


# --------------------------------------------------------------------------
# conditional steps

def _log_halfcauchy(r, scale=R_PRIOR_SCALE):
    return -math.log1p((r / scale) ** 2)


def _update_r(state: ModelState, rng):
    loglik = nb_loglik_dispersion(state.Z, state.theta)
    return slice_sample(lambda r: loglik(r) + _log_halfcauchy(r), state.r, 1.0, rng)


def _rescale_noise(state: ModelState, surface_mean, log_e, rng):
    """Move sigma_eps with the standardised noise held fixed.

    With ``theta = log E + mean + sigma * e`` and ``e ~ N(0, 1)`` a priori
    independent of sigma, the conditional of sigma given ``e`` involves the
    count likelihood directly. Alternating this with the usual conditional
    (given theta) lets the chain travel along the ridge between sigma_eps
    and r.
    """
    base = surface_mean + log_e
    e = (state.theta - base) / state.sigma_eps
    z = state.Z
    log_r = math.log(state.r)
    a, b = SIGMA_PRIOR

    def logp(s):
        theta = base + s * e
        log_denom = np.logaddexp(log_r, theta)
        return float(z.ravel() @ (theta - log_denom).ravel() - state.r * log_denom.sum()) \
            - (2 * a + 1) * math.log(s) - b / (s * s)

    s_new = slice_sample(logp, state.sigma_eps, 1.0, rng)
    state.theta = base + s_new * e
    state.sigma_eps = s_new


def _gaussian_block(state: ModelState, surface, cfg: FitConfig, basis: SplineBasis, rng):
    """Step 5 given the (n, m) Gaussian surface (offset removed)."""
    factors, beta = backfit_factors(surface, state.beta, state.factors, basis, state.sigma_eps, rng)
    dyn = state.dyn
    y = surface @ factors.F
    reg = state.reg
    if reg is None:
        beta = ffbs_coefficients(y, dyn, state.sigma_eps, rng)
        dyn = update_ar_params(beta, dyn, rng, fix=cfg.fix)
    else:
        beta = ffbs_coefficients(y, dyn, state.sigma_eps, rng, mean=dyn.mu + reg.mean_path())
        reg = update_regression(beta, reg, dyn, rng)
        dyn = update_ar_params(beta, dyn, rng, mean_offset=reg.mean_path(), fix=cfg.fix)
    resid = surface - beta @ factors.F.T
    a, b = SIGMA_PRIOR
    var = (b + 0.5 * float(np.sum(resid * resid))) / rng.gamma(a + 0.5 * resid.size)
    state.factors, state.beta, state.dyn, state.reg = factors, beta, dyn, reg
    state.sigma_eps = math.sqrt(var)


def _snapshot(state: ModelState) -> dict:
    return {
        "r": state.r,
        "sigma_eps": state.sigma_eps,
        "nu_eta": state.dyn.nu_eta,
        "F": state.factors.F,
        "beta": state.beta,
        "mu": state.dyn.mu,
        "phi": state.dyn.phi,
        "sigma_eta": state.dyn.sigma_eta,
        "lambda_f": state.factors.lambda_f,
        **({} if state.reg is None else {"alpha": state.reg.alpha}),
    }


def _allocate(cfg: FitConfig, first: dict, n, m, predictive_dtype):
    S = cfg.n_saved
    draws = {k: np.empty((S,) + np.shape(v)) for k, v in first.items()}
    return draws, np.empty((S, n, m), dtype=predictive_dtype)


def _run(panel: CountPanel, cfg: FitConfig, gaussian: bool, callback=None) -> DrawStore:
    _set_threads()
    _check_panel(panel, cfg)
    n, m = panel.shape
    rng = RngHandle(cfg.seed).generator()
    basis = build_spline_basis(np.arange(m, dtype=float), cfg.L_m)
    if cfg.K > basis.size:
        raise InvalidParameterError(f"K={cfg.K} exceeds the basis size {basis.size}")
    state = _initial_state(panel, cfg, basis, gaussian)
    missing = panel.missing
    any_missing = bool(missing.any())
    log_e = np.log(panel.offsets)
    fixed_r = gaussian or cfg.r_fixed is not None
    if gaussian:
        y_obs = gauss_response(panel.counts, panel.offsets)

    draws = predictive = None
    saved = 0
    for it in range(cfg.iterations):
        if gaussian:
            if any_missing:
                mean = state.beta @ state.factors.F.T
                fill = mean + state.sigma_eps * rng.standard_normal((n, m))
                state.theta = np.where(missing, fill, y_obs)
            else:
                state.theta = y_obs
            _gaussian_block(state, state.theta, cfg, basis, rng)
        else:
            if any_missing:
                state.Z[missing] = sample_nb(state.r, state.theta[missing], rng)
            if not fixed_r:
                state.r = _update_r(state, rng)
            state.xi = update_xi(state.Z, state.r, state.theta, rng)
            prior_mean = state.beta @ state.factors.F.T + log_e
            state.theta = update_theta(state.Z, state.r, state.xi, prior_mean, state.sigma_eps, rng)
            _rescale_noise(state, prior_mean - log_e, log_e, rng)
            _gaussian_block(state, state.theta - log_e, cfg, basis, rng)

        if it >= cfg.burn_in and (it - cfg.burn_in + 1) % cfg.thin == 0 and saved < cfg.n_saved:
            snap = _snapshot(state)
            if draws is None:
                draws, predictive = _allocate(cfg, snap, n, m, float if gaussian else np.int64)
            for k, v in snap.items():
                draws[k][saved] = v
            if gaussian:
                predictive[saved] = np.where(missing, gauss_counts(state.theta, panel.offsets), panel.counts)
            else:
                predictive[saved] = state.Z
            saved += 1
        if callback is not None:
            callback(it, state)
        if (it + 1) % 1000 == 0:
            log.debug("iteration %d/%d, r=%.3g, sigma_eps=%.3g", it + 1, cfg.iterations, state.r, state.sigma_eps)
    return DrawStore(config=cfg, panel=panel, draws=draws, predictive=predictive)


def fit(panel: CountPanel, cfg: FitConfig, callback=None) -> DrawStore:
    """Run the sampler for the variant in ``cfg`` and keep the thinned post-burn-in draws."""
    return _run(panel, cfg, gaussian=cfg.variant == "gauss", callback=callback)


def fit_gauss(panel: CountPanel, cfg: FitConfig, callback=None) -> DrawStore:
    """Gaussian functional model on the square-root rates; predictive counts are E * max(Y, 0)^2."""
    if cfg.variant != "gauss":
        cfg = FitConfig(**{**cfg.__dict__, "variant": "gauss", "r_fixed": None})
    return _run(panel, cfg, gaussian=True, callback=callback)


# --------------------------------------------------------------------------
# predictive summaries

def posterior_predictive_cells(store: DrawStore, cells) -> np.ndarray:
    """(S, len(cells)) predictive draws for the (year, week) index pairs in ``cells``."""
    n, m = store.panel.shape
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if np.any(cells < 0) or np.any(cells[:, 0] >= n) or np.any(cells[:, 1] >= m):
        raise InvalidInputError(f"cell index outside the {n} x {m} panel")
    return store.predictive[:, cells[:, 0], cells[:, 1]]


def predictive_summary(draws, level=0.95):
    """Posterior mean and equal-tailed interval of a vector of predictive draws."""
    draws = np.asarray(draws)
    if draws.size == 0:
        raise InvalidInputError("no draws to summarise")
    if not 0 < level < 1:
        raise InvalidParameterError("level must lie in (0, 1)")
    lo, hi = np.quantile(draws, [(1 - level) / 2, (1 + level) / 2], method="inverted_cdf", axis=0)
    return draws.mean(axis=0), lo, hi


def effective_sample_size(x) -> float:
    """ESS of a scalar chain via Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float)
    S = x.size
    if S < 4 or np.var(x) == 0:
        return float(S)
    xc = x - x.mean()
    nfft = 1 << (2 * S - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acf = np.fft.irfft(f * np.conj(f), nfft)[:S]
    acf /= acf[0]
    total = 0.0
    for t in range(0, S - 1, 2):
        pair = acf[t] + acf[t + 1]
        if pair <= 0:
            break
        total += pair
    return float(S / max(2 * total - 1, 1e-12))
