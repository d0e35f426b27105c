"""Command-line entry points: ``nbfts fit | forecast | simulate | evaluate``.

Failures exit nonzero after printing one line ``error <code>: <message>`` on
stderr.
"""
from __future__ import annotations

import argparse
import csv
import glob
import logging
import sys
from pathlib import Path

import numpy as np

from .config import merge, read_config
from .errors import InvalidInputError, NBFTSError
from .forecast import (BY_WEEK_HEADER, FORECAST_HEADER, PEAK_HEADER, SUMMARY_HEADER, ForecastTask,
                       baseline_mean_fda, baseline_rw_fda, forecast_rows, mae_by_year, peak_row, read_table,
                       report_from_draws, summarize, task_panel, write_table)
from .gibbs import FitConfig, effective_sample_size, fit
from .panel import read_counts, read_offsets, write_counts, write_offsets
from .plotting import plot_forecast, plot_mae_by_week, plot_peaks, plot_traces
from .rng import derive_seed
from .simulate import SimConfig, simulate
from .store import save_store, validate_store

log = logging.getLogger("nbfts")

FIT_DEFAULTS = {"variant": "nb", "k": 6, "iterations": 30000, "burnin": 5000, "thin": 5, "seed": 0,
                "r_fixed": None, "l_m": None}
FORECAST_DEFAULTS = {**FIT_DEFAULTS, "m0": 9, "level": 0.95, "target_year": None, "era": "all", "task_id": None}
SIM_DEFAULTS = {"r": 1000.0, "reps": 1, "seed": 0, "n": 50, "m": 50, "missing_frac": 0.10, "m0": 30}


def _fit_flags(p):
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--variant", choices=["nb", "pois", "gauss"])
    p.add_argument("--k", type=int, help="number of factors")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--l-m", dest="l_m", type=int, help="spline basis size")
    p.add_argument("--r-fixed", dest="r_fixed", type=float, help="hold the dispersion at this value")
    p.add_argument("--seed", type=int)
    p.add_argument("--offsets", help="year,population table")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="nbfts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="run the sampler and write a draw store")
    p.add_argument("counts", nargs="?", help="year,week,count table")
    _fit_flags(p)

    p = sub.add_parser("forecast", help="forecast the rest of a year from its first m0 weeks")
    p.add_argument("counts", nargs="?", help="year,week,count table")
    _fit_flags(p)
    p.add_argument("--target-year", dest="target_year", type=int, help="year label to forecast (default: last)")
    p.add_argument("--m0", type=int, help="observed weeks in the target year")
    p.add_argument("--level", type=float)
    p.add_argument("--actuals", help="year,week,count table used only for scoring")
    p.add_argument("--era", help="label carried into the metric tables")
    p.add_argument("--task-id", dest="task_id")

    p = sub.add_parser("simulate", help="write simulated panels with their truth")
    p.add_argument("--config")
    p.add_argument("--r", type=float, help="NB dispersion of the simulated counts")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--missing-frac", dest="missing_frac", type=float)
    p.add_argument("--m0", type=int)
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="pool forecast tables into summary metrics")
    p.add_argument("inputs", nargs="+", help="forecast output directories (searched recursively)")
    p.add_argument("--out")
    return parser


def _settings(args, defaults):
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose", "inputs")}
    s = merge(file_values, flags, defaults)
    if s.get("out") is None:
        raise InvalidInputError("an output directory is required (--out or 'out' in the config)")
    return s


def _fit_config(s) -> FitConfig:
    return FitConfig(K=s["k"], iterations=s["iterations"], burn_in=s["burnin"], thin=s["thin"],
                     variant=s["variant"], r_fixed=s["r_fixed"], L_m=s["l_m"], seed=s["seed"])


def _load_panel(s):
    if not s.get("counts"):
        raise InvalidInputError("a counts table is required")
    panel = read_counts(s["counts"])
    return read_offsets(s.get("offsets"), panel)


def cmd_fit(args):
    s = _settings(args, FIT_DEFAULTS)
    panel = _load_panel(s)
    store = fit(panel, _fit_config(s))
    out = save_store(store, Path(s["out"]))
    validate_store(out)
    rows = []
    for name, arr in sorted(store.draws.items()):
        flat = np.asarray(arr).reshape(store.n_draws, -1)
        for j in range(flat.shape[1]):
            rows.append([name, j, float(flat[:, j].mean()), effective_sample_size(flat[:, j])])
    write_table(out / "ess.csv", ["parameter", "index", "mean", "ess"], rows)
    plot_traces(store.draws, out / "traces.png")
    return out


def _year_index(panel, label):
    if label is None:
        return panel.shape[0] - 1
    try:
        return panel.year_labels.index(label)
    except ValueError:
        raise InvalidInputError(f"target year {label} is not in the counts table") from None


def cmd_forecast(args):
    s = _settings(args, FORECAST_DEFAULTS)
    panel = _load_panel(s)
    target = _year_index(panel, s["target_year"])
    if target == 0:
        raise InvalidInputError("the target year needs at least one earlier year")
    task = ForecastTask(train_years=tuple(range(target)), target_year=target, m0=s["m0"], level=s["level"],
                        task_id=s["task_id"] or str(panel.year_labels[target]), era=s["era"])
    cfg = _fit_config(s)
    store = fit(task_panel(panel, task), cfg)
    report = report_from_draws(store.predictive[:, -1, task.m0:], task.m0, task.level, cfg.variant)

    if s.get("actuals"):
        ref = read_counts(s["actuals"])
        if ref.shape[1] != panel.shape[1] or panel.year_labels[target] not in ref.year_labels:
            raise InvalidInputError("actuals table does not cover the target year")
        row = ref.year_labels.index(panel.year_labels[target])
        actual_full = np.where(ref.missing[row], np.nan, ref.counts[row].astype(float))
    else:
        actual_full = np.where(panel.missing[target], np.nan, panel.counts[target].astype(float))
    actual = actual_full[task.m0:]

    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "forecast.csv", FORECAST_HEADER, forecast_rows(report, task, actual))
    write_table(out / "peaks.csv", PEAK_HEADER, [peak_row(report, task, actual)])
    mean_fda, rw_fda = baseline_mean_fda(panel, task), baseline_rw_fda(panel, task)
    write_table(out / "baselines.csv", ["week", "actual", "mean_fda", "rw_fda"],
                zip(report.weeks, actual, mean_fda, rw_fda))
    write_table(out / "peak_time_posterior.csv", ["week", "probability"],
                [[int(w), c / report.peak_time_draws.size]
                 for w, c in zip(*np.unique(report.peak_time_draws, return_counts=True))])
    history = np.where(panel.missing[: target], np.nan, panel.counts[: target].astype(float))
    plot_forecast(history, actual_full[: task.m0], report, out / "forecast.png",
                  actual=None if np.isnan(actual).all() else actual,
                  title=f"{panel.year_labels[target]}: weeks {task.m0 + 1}-{panel.shape[1]}")
    plot_peaks(report, out / "peaks.png")
    if not np.isnan(actual).all():
        log.info("MAE %.3f (Mean-FDA %.3f, RW-FDA %.3f)", mae_by_year(actual, report.point),
                 mae_by_year(actual, mean_fda), mae_by_year(actual, rw_fda))
    return out


def _write_truth(path, panel, truth):
    n, m = panel.shape
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "week", "theta_star", "mu_star", "true_curve", "complete_count", "deleted"])
        for i in range(n):
            for j in range(m):
                w.writerow([panel.year_labels[i], panel.week_labels[j], repr(float(truth.theta_star[i, j])),
                            repr(float(truth.mu_star[i, j])), repr(float(truth.true_curves[i, j])),
                            int(truth.complete_counts[i, j]), int(truth.deleted[i, j])])


def cmd_simulate(args):
    s = _settings(args, SIM_DEFAULTS)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    for rep in range(s["reps"]):
        cfg = SimConfig(n=s["n"], m=s["m"], r=s["r"], missing_frac=s["missing_frac"], m0=s["m0"],
                        seed=derive_seed(s["seed"], rep))
        panel, truth = simulate(cfg)
        stem = out / f"sim_{rep + 1:03d}"
        write_counts(panel, f"{stem}_counts.csv")
        complete = panel.masked(np.zeros(panel.shape, dtype=bool))
        complete.counts, complete.missing = truth.complete_counts.copy(), np.zeros(panel.shape, dtype=bool)
        write_counts(complete, f"{stem}_complete.csv")
        write_offsets(panel, f"{stem}_offsets.csv")
        _write_truth(f"{stem}_truth.csv", panel, truth)
    return out


def cmd_evaluate(args):
    if args.out is None:
        raise InvalidInputError("an output directory is required (--out)")
    forecast_files, peak_files = [], []
    for root in args.inputs:
        root = Path(root)
        if not root.exists():
            raise InvalidInputError(f"{root} does not exist")
        forecast_files += sorted(glob.glob(str(root / "**" / "forecast.csv"), recursive=True))
        peak_files += sorted(glob.glob(str(root / "**" / "peaks.csv"), recursive=True))
    if not forecast_files:
        raise InvalidInputError("no forecast.csv tables found")
    records = [rec for f in forecast_files for rec in read_table(f)]
    peaks = [rec for f in peak_files for rec in read_table(f)]
    for rec in records[:1] + peaks[:1]:
        missing = {"variant", "era", "task_id"} - set(rec)
        if missing:
            raise InvalidInputError(f"table is missing columns {sorted(missing)}")
    summary, by_week = summarize(records, peaks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "summary.csv", SUMMARY_HEADER, summary)
    write_table(out / "mae_by_week.csv", BY_WEEK_HEADER, by_week)
    if by_week:
        plot_mae_by_week(by_week, out / "mae_by_week.png")
    return out


COMMANDS = {"fit": cmd_fit, "forecast": cmd_forecast, "simulate": cmd_simulate, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NBFTSError as exc:
        print(f"error {exc.code}: {exc}".replace("\n", " "), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        code = "io" if isinstance(exc, OSError) else "invalid-input"
        print(f"error {code}: {exc}".replace("\n", " "), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
