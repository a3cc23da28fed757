"""Reader for sweep stats CSVs.

Expected layout, one header line then data rows:

    mu,t,series,mean,p01,p10,p90,p99

``mu`` and the percentile columns are floats, ``t`` is a non-negative
integer, ``series`` is a label such as ``infected`` or ``savings``.
The rows for one (mu, series) pair form a time series; the reader
groups them and returns each group with its columns as arrays sorted
by ``t``.  Any deviation from the layout raises SchemaError naming the
offending column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OptionError, SchemaError

__all__ = [
    "STATS_COLUMNS",
    "PERCENTILE_COLUMNS",
    "SeriesBand",
    "StatsTable",
    "load_stats",
    "level_columns",
]

STATS_COLUMNS = ("mu", "t", "series", "mean", "p01", "p10", "p90", "p99")
PERCENTILE_COLUMNS = ("p01", "p10", "p90", "p99")


@dataclass(frozen=True)
class SeriesBand:
    """One (mu, series) time series with its percentile columns."""

    mu: float
    series: str
    t: np.ndarray
    mean: np.ndarray
    percentiles: dict[str, np.ndarray]


@dataclass(frozen=True)
class StatsTable:
    """All series bands found in one stats CSV."""

    bands: tuple[SeriesBand, ...]

    @property
    def mu_values(self) -> tuple[float, ...]:
        return tuple(sorted({b.mu for b in self.bands}))

    @property
    def series_names(self) -> tuple[str, ...]:
        return tuple(sorted({b.series for b in self.bands}))

    def band(self, mu: float, series: str) -> SeriesBand:
        for b in self.bands:
            if b.series == series and abs(b.mu - mu) <= 1e-12:
                return b
        raise OptionError(f"no rows for mu={mu:g} series={series!r} in the stats file")


def _check_header(header: list[str]) -> None:
    expected = STATS_COLUMNS
    for col in expected:
        if col not in header:
            raise SchemaError("missing column", col)
    for col in header:
        if col not in expected:
            raise SchemaError("unexpected column", col)
    for k, col in enumerate(header):
        if col != expected[k]:
            raise SchemaError(f"column out of place at position {k}", col)


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"line {line}: {text!r} is not a number", column) from None


def load_stats(path) -> StatsTable:
    """Parse and validate a stats CSV into grouped series bands."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file, header line expected", STATS_COLUMNS[0]) from None
        _check_header(header)

        groups: dict[tuple[float, str], dict[int, tuple]] = {}
        for line, row in enumerate(reader, start=2):
            if len(row) < len(STATS_COLUMNS):
                raise SchemaError(f"line {line}: row has {len(row)} fields", STATS_COLUMNS[len(row)])
            if len(row) > len(STATS_COLUMNS):
                raise SchemaError(f"line {line}: row has {len(row)} fields", header[-1])
            mu = _parse_float(row[0], "mu", line)
            t_raw = _parse_float(row[1], "t", line)
            t = int(t_raw)
            if t != t_raw or t < 0:
                raise SchemaError(f"line {line}: {row[1]!r} is not a non-negative integer", "t")
            series = row[2]
            values = tuple(
                _parse_float(row[3 + k], STATS_COLUMNS[3 + k], line)
                for k in range(1 + len(PERCENTILE_COLUMNS))
            )
            steps = groups.setdefault((mu, series), {})
            if t in steps:
                raise SchemaError(f"line {line}: duplicate time step for mu={mu:g} {series!r}", "t")
            steps[t] = values

    bands = []
    for (mu, series), steps in sorted(groups.items()):
        order = sorted(steps)
        stacked = np.array([steps[t] for t in order])
        bands.append(
            SeriesBand(
                mu=mu,
                series=series,
                t=np.array(order, dtype=np.int64),
                mean=stacked[:, 0],
                percentiles={col: stacked[:, 1 + k] for k, col in enumerate(PERCENTILE_COLUMNS)},
            )
        )
    return StatsTable(tuple(bands))


def level_columns(level: int) -> tuple[str, str]:
    """Percentile column pair holding the middle ``level`` percent."""
    if not 0 < level < 100:
        raise OptionError(f"band level {level} outside 1..99")
    if (100 - level) % 2:
        raise OptionError(f"band level {level} does not split the tails evenly")
    lo = (100 - level) // 2
    names = (f"p{lo:02d}", f"p{100 - lo:02d}")
    for name in names:
        if name not in PERCENTILE_COLUMNS:
            raise SchemaError(f"band level {level} needs a percentile the stats schema lacks", name)
    return names
