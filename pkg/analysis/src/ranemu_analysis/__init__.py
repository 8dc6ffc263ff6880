"""Offline analysis of ranemu metrics files.

Reads the versioned CSV the emulator writes and renders comparison
figures. Deliberately independent of the emulator package: the file
format is the only contract.
"""

from .reader import (COLUMNS, SCHEMA_LINE, WARMUP_MS, EmptyInputError,
                     MetricsFormatError, SchemaMismatchError, read_metrics,
                     steady_state)
from .figures import KINDS, ExperimentSeries, build_series, plot_figure

__all__ = [
    "COLUMNS", "SCHEMA_LINE", "WARMUP_MS", "EmptyInputError",
    "MetricsFormatError", "SchemaMismatchError", "read_metrics",
    "steady_state", "KINDS", "ExperimentSeries", "build_series",
    "plot_figure",
]
