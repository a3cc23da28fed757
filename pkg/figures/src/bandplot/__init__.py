"""Shaded percentile band figures from sweep stats CSVs."""

from .errors import OptionError, SchemaError
from .render import FigureSpec, Panel, collect_panels, render_bands
from .stats import (
    PERCENTILE_COLUMNS,
    STATS_COLUMNS,
    SeriesBand,
    StatsTable,
    level_columns,
    load_stats,
)

__version__ = "0.1.0"

__all__ = [
    "OptionError",
    "SchemaError",
    "FigureSpec",
    "Panel",
    "collect_panels",
    "render_bands",
    "PERCENTILE_COLUMNS",
    "STATS_COLUMNS",
    "SeriesBand",
    "StatsTable",
    "level_columns",
    "load_stats",
    "__version__",
]
