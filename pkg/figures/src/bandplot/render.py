"""Shaded percentile band figures.

A figure is a grid of panels, one row per mu value and one column per
series.  Each panel shows the ensemble mean as a line with one shaded
band per requested level, wider bands drawn lighter.  Panel data is
collected by a pure function of the parsed table so that re-rendering
the same CSV plots identical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .errors import OptionError
from .stats import StatsTable, level_columns, load_stats

__all__ = ["FigureSpec", "Panel", "collect_panels", "render_bands"]

LINE_COLOR = "#1f4e79"
BAND_COLOR = "#2f7fc1"


@dataclass(frozen=True)
class FigureSpec:
    """What to plot and where to write it.

    ``mu_values`` and ``series`` default to everything present in the
    stats file; ``band_levels`` are middle-percent spans, each needing
    its percentile column pair in the schema.
    """

    stats_path: str | Path
    out_path: str | Path
    mu_values: tuple[float, ...] | None = None
    series: tuple[str, ...] | None = None
    band_levels: tuple[int, ...] = (98, 80)

    def __post_init__(self):
        if not self.band_levels:
            raise OptionError("at least one band level is required")
        for level in self.band_levels:
            level_columns(int(level))


@dataclass(frozen=True)
class Panel:
    """Plot-ready data for one (mu, series) cell."""

    mu: float
    series: str
    t: np.ndarray
    mean: np.ndarray
    # (level, low, high) triples, widest first
    bands: tuple[tuple[int, np.ndarray, np.ndarray], ...] = field(default_factory=tuple)


def _resolve(requested, available, kind: str):
    if requested is None:
        return tuple(available)
    chosen = []
    for want in requested:
        if kind == "mu":
            match = [v for v in available if abs(v - want) <= 1e-12]
        else:
            match = [v for v in available if v == want]
        if not match:
            have = ", ".join(f"{v:g}" if kind == "mu" else repr(v) for v in available)
            raise OptionError(f"{kind} {want!r} not in the stats file (file has: {have})")
        chosen.append(match[0])
    return tuple(chosen)


def collect_panels(table: StatsTable, spec: FigureSpec) -> tuple[Panel, ...]:
    """Pure selection of panel data; no drawing, no file access."""
    if not table.bands:
        raise OptionError("the stats file has no data rows")
    mus = _resolve(spec.mu_values, table.mu_values, "mu")
    names = _resolve(spec.series, table.series_names, "series")
    levels = sorted({int(l) for l in spec.band_levels}, reverse=True)
    panels = []
    for mu in mus:
        for series in names:
            band = table.band(mu, series)
            spans = tuple(
                (level, band.percentiles[lo], band.percentiles[hi])
                for level in levels
                for lo, hi in (level_columns(level),)
            )
            panels.append(Panel(mu, series, band.t, band.mean, spans))
    return tuple(panels)


def render_bands(spec: FigureSpec) -> Path:
    """Read the stats CSV, draw the panel grid, write the image file."""
    table = load_stats(spec.stats_path)
    panels = collect_panels(table, spec)
    mus = sorted({p.mu for p in panels})
    names = sorted({p.series for p in panels})
    nrows, ncols = len(mus), len(names)

    fig = Figure(figsize=(4.8 * ncols, 3.2 * nrows))
    axes = fig.subplots(nrows, ncols, squeeze=False)
    n_levels = max(len(p.bands) for p in panels)
    for panel in panels:
        ax = axes[mus.index(panel.mu)][names.index(panel.series)]
        for rank, (level, low, high) in enumerate(panel.bands):
            alpha = 0.18 + 0.3 * rank / max(1, n_levels - 1)
            ax.fill_between(
                panel.t, low, high,
                color=BAND_COLOR, alpha=alpha, linewidth=0,
                label=f"middle {level}%",
            )
        ax.plot(panel.t, panel.mean, color=LINE_COLOR, linewidth=1.6, label="mean")
        ax.set_title(f"{panel.series}, mu = {panel.mu:g}", fontsize=10)
        ax.set_xlabel("t")
        ax.set_ylabel(panel.series)
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    out = Path(spec.out_path)
    fig.savefig(out)
    return out
