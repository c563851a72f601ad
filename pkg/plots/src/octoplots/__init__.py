"""Figure rendering for the simulator's CSV outputs."""

from octoplots.schema import SchemaError, read_csv
from octoplots.figures import render_bars, render_scatter, render_timeseries

__all__ = [
    "SchemaError",
    "read_csv",
    "render_bars",
    "render_scatter",
    "render_timeseries",
]
