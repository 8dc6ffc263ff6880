"""Load and window ranemu metrics files.

The format contract is restated here on purpose: this package checks
the file against its own copy instead of importing the emulator, so a
drifting producer fails loudly at read time.
"""

from __future__ import annotations

import pandas as pd

SCHEMA_LINE = "#schema=ranemu.metrics.v1"

COLUMNS = ("time_ms", "ue_id", "direction", "granted_bits", "released_bits",
           "dropped_bits", "buffer_bits", "sinr_db", "mcs", "cqi", "ri",
           "mean_packet_latency_ms", "pos_x_m", "pos_y_m")

# Throughput averages need the scheduler's rate estimate to settle, so
# the first second of every run is treated as warm-up and excluded.
WARMUP_MS = 1000.0


class MetricsFormatError(ValueError):
    """The file is not a usable metrics file."""


class SchemaMismatchError(MetricsFormatError):
    """Schema line or column header differs from the supported format."""


class EmptyInputError(MetricsFormatError):
    """No rows survive to aggregate."""


def read_metrics(path: str) -> pd.DataFrame:
    """Parse one metrics file, enforcing the schema line and header.

    Returns every data row, warm-up included; callers window with
    steady_state(). Raises SchemaMismatchError on a foreign format and
    EmptyInputError when the file holds headers but no rows.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise SchemaMismatchError(
                f"{path}: expected first line {SCHEMA_LINE!r}, got {first!r}")
        header = fh.readline().rstrip("\n")
        if tuple(header.split(",")) != COLUMNS:
            raise SchemaMismatchError(
                f"{path}: column header does not match the supported format")
        df = pd.read_csv(fh, names=COLUMNS, header=None)
    if df.empty:
        raise EmptyInputError(f"{path}: no data rows")
    return df


def steady_state(df: pd.DataFrame, warmup_ms: float = WARMUP_MS,
                 source: str = "<metrics>") -> pd.DataFrame:
    """Drop rows from the warm-up window (time_ms < warmup_ms)."""
    out = df[df["time_ms"] >= warmup_ms]
    if out.empty:
        raise EmptyInputError(
            f"{source}: no rows at or after {warmup_ms:g} ms; the run must "
            f"outlast the warm-up window")
    return out
