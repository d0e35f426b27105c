"""Count panels and their long-format text tables.

Counts are read from ``year,week,count`` files (blank count = missing) and
population offsets from ``year,population`` files.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidInputError

log = logging.getLogger(__name__)

WEEKS_PER_YEAR = 52


@dataclass
class CountPanel:
    counts: np.ndarray  # (n, m) int64; value at missing cells is meaningless
    missing: np.ndarray  # (n, m) bool, True where unobserved
    offsets: np.ndarray  # (n, m) float, > 0
    year_labels: list = field(default_factory=list)
    week_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.missing = np.asarray(self.missing, dtype=bool)
        self.offsets = np.asarray(self.offsets, dtype=float)
        n, m = self.counts.shape
        if self.missing.shape != (n, m) or self.offsets.shape != (n, m):
            raise DimensionError("counts, mask and offsets must share one (n, m) shape")
        if not self.year_labels:
            self.year_labels = list(range(1, n + 1))
        if not self.week_labels:
            self.week_labels = list(range(1, m + 1))
        if len(self.year_labels) != n or len(self.week_labels) != m:
            raise DimensionError("label lengths do not match the panel shape")
        if np.any(~(self.offsets > 0)):
            raise InvalidInputError("offsets must be positive everywhere")
        if np.any(self.counts[~self.missing] < 0):
            raise InvalidInputError("counts must be nonnegative")
        self.counts = np.where(self.missing, 0, self.counts)

    @property
    def shape(self):
        return self.counts.shape

    def observed_values(self):
        return self.counts[~self.missing]

    def rows(self, idx) -> "CountPanel":
        idx = list(idx)
        return CountPanel(self.counts[idx], self.missing[idx], self.offsets[idx],
                          [self.year_labels[i] for i in idx], list(self.week_labels))

    def with_offsets(self, offsets) -> "CountPanel":
        return replace(self, offsets=np.broadcast_to(np.asarray(offsets, dtype=float), self.shape).copy())

    def masked(self, cells) -> "CountPanel":
        """Copy with the given boolean (n, m) cells marked missing."""
        missing = self.missing | np.asarray(cells, dtype=bool)
        return CountPanel(np.where(missing, 0, self.counts), missing, self.offsets.copy(),
                          list(self.year_labels), list(self.week_labels))


def _parse_int(text, what, lineno, path):
    try:
        return int(text)
    except ValueError:
        raise InvalidInputError(f"{path}:{lineno}: {what} {text!r} is not an integer") from None


def read_counts(path, weeks_per_year=WEEKS_PER_YEAR) -> CountPanel:
    """Read a ``year,week,count`` table into a panel with unit offsets.

    Week 53 (when present) is added into the last week of the year.
    """
    path = Path(path)
    cells = {}
    seen_line = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header[:3] != ["year", "week", "count"]:
            raise InvalidInputError(f"{path}:1: expected header 'year,week,count', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InvalidInputError(f"{path}:{lineno}: malformed row {row!r} (expected 3 fields)")
            year = _parse_int(row[0].strip(), "year", lineno, path)
            week = _parse_int(row[1].strip(), "week", lineno, path)
            if not 1 <= week <= weeks_per_year + 1:
                raise InvalidInputError(f"{path}:{lineno}: week {week} outside 1..{weeks_per_year + 1}")
            text = row[2].strip()
            value = None if text == "" else _parse_int(text, "count", lineno, path)
            if value is not None and value < 0:
                raise InvalidInputError(f"{path}:{lineno}: negative count {value}")
            key = (year, week)
            if key in seen_line:
                raise InvalidInputError(
                    f"{path}: duplicate entry for year {year} week {week} on lines {seen_line[key]} and {lineno}")
            seen_line[key] = lineno
            cells[key] = value

    if not cells:
        raise InvalidInputError(f"{path}: no data rows")
    years = sorted({y for y, _ in cells})
    max_week = max(w for _, w in cells)
    m = weeks_per_year if max_week > weeks_per_year else max_week
    counts = np.zeros((len(years), m), dtype=np.int64)
    missing = np.ones((len(years), m), dtype=bool)
    row_of = {y: i for i, y in enumerate(years)}
    for (year, week), value in sorted(cells.items()):
        i = row_of[year]
        j = min(week, m) - 1
        if week > m:
            # fold the extra week into the last one; missing stays missing only if both are
            if value is not None:
                counts[i, j] = (0 if missing[i, j] else counts[i, j]) + value
                missing[i, j] = False
            continue
        if value is not None:
            counts[i, j] += value
            missing[i, j] = False
    return CountPanel(counts, missing, np.ones_like(counts, dtype=float), years, list(range(1, m + 1)))


def write_counts(panel: CountPanel, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "week", "count"])
        for i, year in enumerate(panel.year_labels):
            for j, week in enumerate(panel.week_labels):
                w.writerow([year, week, "" if panel.missing[i, j] else int(panel.counts[i, j])])


def read_offsets(path, panel: CountPanel) -> CountPanel:
    """Attach yearly populations (``year,population``) as offsets; ``None`` means unit offsets."""
    if path is None:
        log.info("no offsets file given; using unit offsets")
        return panel.with_offsets(1.0)
    path = Path(path)
    pops = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header[:2] != ["year", "population"]:
            raise InvalidInputError(f"{path}:1: expected header 'year,population'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidInputError(f"{path}:{lineno}: malformed row {row!r}")
            year = _parse_int(row[0].strip(), "year", lineno, path)
            try:
                pop = float(row[1])
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: population {row[1]!r} is not a number") from None
            if not pop > 0:
                raise InvalidInputError(f"{path}:{lineno}: population must be positive, got {pop}")
            pops[year] = pop
    absent = [y for y in panel.year_labels if y not in pops]
    if absent:
        raise InvalidInputError(f"{path}: no population for year(s) {absent}")
    offsets = np.repeat(np.array([pops[y] for y in panel.year_labels])[:, None], panel.shape[1], axis=1)
    return panel.with_offsets(offsets)


def write_offsets(panel: CountPanel, path):
    """Write per-year offsets; the panel's offsets must be constant within each year."""
    if np.any(panel.offsets != panel.offsets[:, :1]):
        raise InvalidInputError("offsets vary within a year and cannot be written as year,population")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "population"])
        for year, pop in zip(panel.year_labels, panel.offsets[:, 0]):
            w.writerow([year, repr(float(pop))])
