"""Render obstacle-control CSV outputs into figures.

These scripts never recompute anything: every plotted number comes from the
CSV (there is deliberately no solver import anywhere in this package).
"""

from .render import PlotDataError, load_csv, plot_counterexample

__all__ = ["PlotDataError", "load_csv", "plot_counterexample"]
