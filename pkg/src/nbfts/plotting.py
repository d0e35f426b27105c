"""Figures for forecast reports, metric summaries and chain traces.

Everything renders with the Agg backend straight to files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_forecast(history, observed, report, path, actual=None, title=None):
    """Past years in grey, the target year's observed weeks, and the predictive band.

    ``history`` is (years, m) with NaN for missing cells; ``observed`` the
    target year's first m0 weeks.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        m = history.shape[1]
        weeks = np.arange(1, m + 1)
        for row in history:
            ax.plot(weeks, row, color="0.75", lw=0.7)
        ax.plot(weeks[: len(observed)], observed, color="k", lw=1.6, label="observed")
        ax.fill_between(report.weeks, report.lower, report.upper, color="C0", alpha=0.25,
                        label=f"{int(round(100 * report.level))}% interval")
        ax.plot(report.weeks, report.point, color="C0", lw=1.6, label="forecast mean")
        if actual is not None:
            ax.plot(report.weeks, actual, "o", color="C3", ms=3, label="actual")
        ax.set_xlabel("week")
        ax.set_ylabel("count")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=8)
        return _save(fig, path)


def plot_peaks(report, path):
    """Posterior of the peak week (credible set shaded) and of the peak value."""
    with plt.rc_context(STYLE):
        fig, (ax_t, ax_v) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        weeks, counts = np.unique(report.peak_time_draws, return_counts=True)
        in_set = np.isin(weeks, report.peak_time_interval)
        ax_t.bar(weeks, counts / counts.sum(), color=np.where(in_set, "C4", "0.7"))
        ax_t.set_xlabel("peak week")
        ax_t.set_ylabel("posterior probability")
        ax_v.hist(report.peak_value_draws, bins=40, color="C0", alpha=0.7)
        for v in report.peak_value_interval:
            ax_v.axvline(v, color="C3", ls="--", lw=1)
        ax_v.set_xlabel("peak count")
        return _save(fig, path)


def plot_mae_by_week(rows, path):
    """MAE against forecast week, one line per (variant, era); rows as from ``summarize``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        groups = {}
        for variant, era, week, _, mae in rows:
            groups.setdefault((variant, era), []).append((week, mae))
        for (variant, era), pts in sorted(groups.items()):
            pts = sorted(pts)
            label = variant if era == "all" else f"{variant} ({era})"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
        ax.set_xlabel("forecast week")
        ax.set_ylabel("MAE")
        ax.legend(frameon=False, fontsize=8)
        return _save(fig, path)


def plot_traces(draws, path, names=("r", "sigma_eps", "nu_eta")):
    present = [k for k in names if k in draws]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(present), 1, figsize=(7.0, 1.8 * len(present)), sharex=True, squeeze=False)
        for ax, name in zip(axes[:, 0], present):
            ax.plot(np.asarray(draws[name]), lw=0.6)
            ax.set_ylabel(name)
        axes[-1, 0].set_xlabel("saved draw")
        return _save(fig, path)
