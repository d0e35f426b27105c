"""Rolling-origin forecasts, interval metrics, peak inference and baselines.

A task fits the model to the training years plus the first ``m0`` weeks of
the target year and predicts weeks ``m0 + 1 .. m`` of the target year.
Week numbers in reports are 1-based; array positions are 0-based.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError
from .gibbs import FitConfig, fit, predictive_summary
from .panel import CountPanel


@dataclass(frozen=True)
class ForecastTask:
    train_years: tuple  # 0-based row indices
    target_year: int
    m0: int
    level: float = 0.95
    task_id: str = "task"
    era: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "train_years", tuple(int(i) for i in self.train_years))
        if not self.train_years:
            raise InvalidParameterError("a task needs at least one training year")
        if self.target_year <= max(self.train_years):
            raise InvalidParameterError("the target year must follow every training year")
        if self.m0 < 1:
            raise InvalidParameterError("m0 must be at least 1")
        if not 0 < self.level < 1:
            raise InvalidParameterError("level must lie in (0, 1)")

    def check(self, panel: CountPanel):
        n, m = panel.shape
        if self.target_year >= n or min(self.train_years) < 0:
            raise InvalidInputError(f"task rows outside the panel's {n} years")
        if not self.m0 < m:
            raise InvalidParameterError(f"m0={self.m0} must be below the {m} weeks per year")

    def horizon_mask(self, panel: CountPanel) -> np.ndarray:
        mask = np.zeros(panel.shape, dtype=bool)
        mask[self.target_year, self.m0:] = True
        return mask


@dataclass
class ForecastReport:
    weeks: np.ndarray  # 1-based forecast weeks m0+1..m
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    peak_value_interval: tuple
    peak_time_interval: tuple  # 1-based weeks, sorted
    peak_value_draws: np.ndarray
    peak_time_draws: np.ndarray
    level: float
    variant: str
    draws: np.ndarray = field(repr=False, default=None)  # (S, m - m0) joint predictive draws


def peak_draws(draws, m0):
    """Peak value and (1-based, earliest on ties) peak week of each joint draw."""
    draws = np.asarray(draws)
    idx = np.argmax(draws, axis=1)
    return draws[np.arange(draws.shape[0]), idx], idx + m0 + 1


def peak_time_set(times, level):
    """Smallest set of weeks with posterior mass >= level, added by descending mass."""
    weeks, counts = np.unique(np.asarray(times), return_counts=True)
    order = np.lexsort((weeks, -counts))  # most frequent first, earlier week on ties
    need = level * len(times)
    chosen, mass = [], 0
    for i in order:
        chosen.append(int(weeks[i]))
        mass += counts[i]
        if mass >= need - 1e-9:
            break
    return tuple(sorted(chosen))


def report_from_draws(draws, m0, level, variant) -> ForecastReport:
    draws = np.asarray(draws)
    point, lo, hi = predictive_summary(draws, level)
    pv, pt = peak_draws(draws, m0)
    _, pv_lo, pv_hi = predictive_summary(pv, level)
    return ForecastReport(
        weeks=np.arange(m0 + 1, m0 + 1 + draws.shape[1]), point=point, lower=lo, upper=hi,
        peak_value_interval=(pv_lo.item(), pv_hi.item()), peak_time_interval=peak_time_set(pt, level),
        peak_value_draws=pv, peak_time_draws=pt, level=level, variant=variant, draws=draws)


def task_panel(panel: CountPanel, task: ForecastTask) -> CountPanel:
    """Training rows plus the target year with its horizon blanked out."""
    task.check(panel)
    rows = list(task.train_years) + [task.target_year]
    sub = panel.rows(rows)
    horizon = np.zeros(sub.shape, dtype=bool)
    horizon[-1, task.m0:] = True
    return sub.masked(horizon)


def run_forecast(panel: CountPanel, task: ForecastTask, cfg: FitConfig, design=None) -> ForecastReport:
    """Fit on the task's data and summarise the joint predictive of the horizon."""
    sub = task_panel(panel, task)
    if design is not None:
        rows = list(task.train_years) + [task.target_year]
        cfg = FitConfig(**{**cfg.__dict__, "design": np.asarray(design, dtype=float)[rows]})
    store = fit(sub, cfg)
    return report_from_draws(store.predictive[:, -1, task.m0:], task.m0, task.level, cfg.variant)


# --------------------------------------------------------------------------
# metrics; missing actuals (NaN) are skipped

def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mae_by_year(actual, point) -> float:
    actual, point = _pair(actual, point)
    keep = ~np.isnan(actual)
    return float(np.mean(np.abs(actual[keep] - point[keep])))


def mae_by_week(actuals, points) -> float:
    return mae_by_year(actuals, points)


def _check_order(lowers, uppers):
    lowers, uppers = _pair(lowers, uppers)
    if np.any(lowers > uppers):
        raise InvalidInputError("interval lower bound exceeds upper bound")
    return lowers, uppers


def ecp(actuals, lowers, uppers) -> float:
    lowers, uppers = _check_order(lowers, uppers)
    actuals, _ = _pair(actuals, lowers)
    keep = ~np.isnan(actuals)
    a = actuals[keep]
    return float(np.mean((lowers[keep] <= a) & (a <= uppers[keep])))


def miw(lowers, uppers) -> float:
    lowers, uppers = _check_order(lowers, uppers)
    return float(np.median(uppers - lowers))


# --------------------------------------------------------------------------
# baselines (NaN where no training year is observed at that week)

def _rates(panel: CountPanel, task: ForecastTask):
    task.check(panel)
    rows = list(task.train_years)
    rates = panel.counts[rows] / panel.offsets[rows]
    return np.where(panel.missing[rows], np.nan, rates)[:, task.m0:]


def baseline_mean_fda(panel: CountPanel, task: ForecastTask) -> np.ndarray:
    rates = _rates(panel, task)
    with np.errstate(invalid="ignore"):
        obs = ~np.isnan(rates)
        mean = np.where(obs, rates, 0.0).sum(axis=0) / obs.sum(axis=0)
    return panel.offsets[task.target_year, task.m0:] * mean


def baseline_rw_fda(panel: CountPanel, task: ForecastTask) -> np.ndarray:
    rates = _rates(panel, task)  # rows in training order, most recent last
    out = np.full(rates.shape[1], np.nan)
    for j in range(rates.shape[1]):
        seen = np.flatnonzero(~np.isnan(rates[:, j]))
        if seen.size:
            out[j] = rates[seen[-1], j]
    return panel.offsets[task.target_year, task.m0:] * out


# --------------------------------------------------------------------------
# tables

FORECAST_HEADER = ["task_id", "variant", "era", "m0", "week", "actual", "point", "lower", "upper"]
PEAK_HEADER = ["task_id", "variant", "era", "m0", "peak_value_lower", "peak_value_upper", "peak_value_actual",
               "peak_value_covered", "peak_time_set", "peak_time_actual", "peak_time_covered"]


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def forecast_rows(report: ForecastReport, task: ForecastTask, actual):
    actual = np.asarray(actual, dtype=float)
    return [[task.task_id, report.variant, task.era, task.m0, int(w), a, p, lo, hi]
            for w, a, p, lo, hi in zip(report.weeks, actual, report.point, report.lower, report.upper)]


def peak_row(report: ForecastReport, task: ForecastTask, actual):
    actual = np.asarray(actual, dtype=float)
    if np.isnan(actual).any():
        pv = pt = None
        pv_cov = pt_cov = None
    else:
        pv = float(actual.max())
        pt = int(np.argmax(actual)) + task.m0 + 1
        pv_cov = int(report.peak_value_interval[0] <= pv <= report.peak_value_interval[1])
        pt_cov = int(pt in report.peak_time_interval)
    return [task.task_id, report.variant, task.era, task.m0, report.peak_value_interval[0],
            report.peak_value_interval[1], pv, pv_cov, " ".join(str(w) for w in report.peak_time_interval),
            pt, pt_cov]


def write_table(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_table(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _num(text):
    return np.nan if text == "" else float(text)


def summarize(forecast_records, peak_records):
    """Pooled metrics per (variant, era) from forecast and peak table records.

    ECP and MIW pool every forecast cell; MAE_year averages the per-task MAE;
    peak coverages average the per-task flags over tasks with complete actuals.
    """
    groups = {}
    for rec in forecast_records:
        g = groups.setdefault((rec["variant"], rec["era"]), {"cells": [], "peaks": []})
        g["cells"].append(rec)
    for rec in peak_records:
        groups.setdefault((rec["variant"], rec["era"]), {"cells": [], "peaks": []})["peaks"].append(rec)

    summary, by_week = [], []
    for (variant, era), g in sorted(groups.items()):
        cells = g["cells"]
        actual = np.array([_num(c["actual"]) for c in cells])
        point = np.array([_num(c["point"]) for c in cells])
        lower = np.array([_num(c["lower"]) for c in cells])
        upper = np.array([_num(c["upper"]) for c in cells])
        tasks = sorted({c["task_id"] for c in cells})
        task_of = np.array([c["task_id"] for c in cells])
        maes = [mae_by_year(actual[task_of == t], point[task_of == t]) for t in tasks
                if np.any(~np.isnan(actual[task_of == t]))]
        pv = [int(p["peak_value_covered"]) for p in g["peaks"] if p["peak_value_covered"] != ""]
        pt = [int(p["peak_time_covered"]) for p in g["peaks"] if p["peak_time_covered"] != ""]
        summary.append([variant, era, len(tasks), int(np.sum(~np.isnan(actual))),
                        ecp(actual, lower, upper) if cells else np.nan,
                        miw(lower, upper) if cells else np.nan,
                        float(np.mean(maes)) if maes else np.nan,
                        float(np.mean(pv)) if pv else np.nan,
                        float(np.mean(pt)) if pt else np.nan])
        weeks = np.array([int(c["week"]) for c in cells])
        for w in sorted(set(weeks.tolist())):
            sel = (weeks == w) & ~np.isnan(actual)
            if sel.any():
                by_week.append([variant, era, w, int(sel.sum()), mae_by_week(actual[sel], point[sel])])
    return summary, by_week


SUMMARY_HEADER = ["variant", "era", "n_tasks", "n_cells", "ecp", "miw", "mae_year", "peak_value_coverage",
                  "peak_time_coverage"]
BY_WEEK_HEADER = ["variant", "era", "week", "n_years", "mae_week"]
