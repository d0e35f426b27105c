"""Bayesian negative-binomial models for count-valued functional time series."""
from .errors import (DegenerateBasisError, DimensionError, InvalidInputError, InvalidParameterError,
                     InvalidStateError, NBFTSError, SchemaError)
from .forecast import (ForecastReport, ForecastTask, baseline_mean_fda, baseline_rw_fda, ecp, mae_by_week,
                       mae_by_year, miw, run_forecast)
from .gibbs import DrawStore, FitConfig, fit, fit_gauss, posterior_predictive_cells, predictive_summary
from .negbin import NBParams, nb_moments, nb_pmf, sample_nb
from .panel import CountPanel, read_counts, read_offsets, write_counts
from .polyagamma import sample_polya_gamma
from .rng import RngHandle
from .simulate import SimConfig, SimTruth, forecast_task_for_sim, simulate
from .slice import slice_sample
from .store import load_store, save_store, validate_store

__version__ = "0.1.0"
