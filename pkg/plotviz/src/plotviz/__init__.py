"""Figure rendering for kvsim benchmark CSVs."""

from .plots import (
    BASELINE_STRATEGY,
    COMPARISON_METRICS,
    GROWTH_METRIC,
    PlotSpec,
    build_comparison_figure,
    build_growth_figure,
    percent_change_table,
    plot_comparison,
    plot_growth,
    read_rows,
)

__version__ = "0.1.0"

__all__ = [
    "BASELINE_STRATEGY",
    "COMPARISON_METRICS",
    "GROWTH_METRIC",
    "PlotSpec",
    "build_comparison_figure",
    "build_growth_figure",
    "percent_change_table",
    "plot_comparison",
    "plot_growth",
    "read_rows",
]
