"""Render figures from the pipeline's metrics JSON and district-count CSV.

This package reads only the serialized artifact formats; the file layout
is its entire interface to the pipeline.
"""

from reportplots.metricsio import MetricsError, load_district_counts, load_metrics
from reportplots.plots import plot_densities, plot_district_bars, plot_roc

__all__ = [
    "MetricsError",
    "load_district_counts",
    "load_metrics",
    "plot_densities",
    "plot_district_bars",
    "plot_roc",
]
