"""Build and render the four comparison figures.

Every kind aggregates over the steady-state window only (see
reader.WARMUP_MS) and uses downlink rows. Aggregation rules:

throughput-by-metric
    One bar per label. A label's value is the cell downlink
    throughput of its files averaged together: for each file, sum of
    released_bits over all UEs divided by the number of distinct
    ticks, converted to Mbit/s (bits per 1 ms tick x 1000 / 1e6).

throughput-by-load
    One curve per label, one point per file. x is the number of
    competing UEs in the file (distinct ue_id count minus one for the
    tracked UE), y is the tracked UE's downlink throughput in Mbit/s,
    computed as for the bar kind but over its rows alone.

latency-by-distance
    One curve per label, one point per file. x is the tracked UE's
    mean distance from the origin in meters (hypot of the position
    columns), y the unweighted mean of its non-empty per-tick
    mean_packet_latency_ms values.

throughput-by-mcs
    One curve per label, one point per file. x is the tracked UE's
    modal downlink MCS index (smallest wins a tie), y its MAC-level
    grant rate in Mbit/s: mean granted_bits per tick x 1000 / 1e6.
    Grants count retransmissions, so this sits above the released
    throughput when the link is lossy.

Curve points are sorted by x within each series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .reader import WARMUP_MS, EmptyInputError, read_metrics, steady_state

KINDS = ("throughput-by-metric", "throughput-by-load",
         "latency-by-distance", "throughput-by-mcs")

# (x axis label, y axis label) per kind
_AXES = {
    "throughput-by-metric": ("scheduling metric", "cell DL throughput (Mbit/s)"),
    "throughput-by-load": ("competing UEs", "tracked UE DL throughput (Mbit/s)"),
    "latency-by-distance": ("distance from site (m)", "mean packet latency (ms)"),
    "throughput-by-mcs": ("modal MCS index", "granted DL rate (Mbit/s)"),
}

Inputs = Sequence[tuple[str, Sequence[str]]]


@dataclass(frozen=True)
class ExperimentSeries:
    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    units: str

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError(f"series {self.label!r}: "
                             f"{len(self.x)} x values vs {len(self.y)} y values")
        if not self.units:
            raise ValueError(f"series {self.label!r}: units must be non-empty")


def _steady_dl(path: str, warmup_ms: float) -> pd.DataFrame:
    df = steady_state(read_metrics(path), warmup_ms, source=path)
    return df[df["direction"] == "DL"]


def _ue_rows(df: pd.DataFrame, ue_id: int, path: str) -> pd.DataFrame:
    rows = df[df["ue_id"] == ue_id]
    if rows.empty:
        raise EmptyInputError(f"{path}: no downlink rows for ue {ue_id}")
    return rows


def _throughput_mbps(rows: pd.DataFrame) -> float:
    ticks = rows["time_ms"].nunique()
    return float(rows["released_bits"].sum()) / ticks / 1000.0


def _cell_throughput(path: str, warmup_ms: float) -> float:
    return _throughput_mbps(_steady_dl(path, warmup_ms))


def _ue_point(kind: str, path: str, ue_id: int,
              warmup_ms: float) -> tuple[float, float]:
    dl = _steady_dl(path, warmup_ms)
    rows = _ue_rows(dl, ue_id, path)
    if kind == "throughput-by-load":
        return float(dl["ue_id"].nunique() - 1), _throughput_mbps(rows)
    if kind == "latency-by-distance":
        lat = rows["mean_packet_latency_ms"].dropna()
        if lat.empty:
            raise EmptyInputError(
                f"{path}: ue {ue_id} finished no packets after warm-up")
        dist = float(np.hypot(rows["pos_x_m"], rows["pos_y_m"]).mean())
        return dist, float(lat.mean())
    if kind == "throughput-by-mcs":
        mcs = float(rows["mcs"].mode().iloc[0])
        rate = float(rows["granted_bits"].sum()) / rows["time_ms"].nunique() / 1000.0
        return mcs, rate
    raise ValueError(f"unknown figure kind {kind!r}")


def build_series(kind: str, inputs: Inputs, ue_id: int = 0,
                 warmup_ms: float = WARMUP_MS) -> list[ExperimentSeries]:
    """Aggregate metrics files into one ExperimentSeries per label."""
    if kind not in KINDS:
        raise ValueError(f"unknown figure kind {kind!r} (one of: "
                         + ", ".join(KINDS) + ")")
    if not inputs:
        raise EmptyInputError("no input files given")
    series = []
    for i, (label, paths) in enumerate(inputs):
        if kind == "throughput-by-metric":
            vals = [_cell_throughput(p, warmup_ms) for p in paths]
            series.append(ExperimentSeries(
                label, (float(i),), (sum(vals) / len(vals),), "Mbit/s"))
            continue
        points = sorted(_ue_point(kind, p, ue_id, warmup_ms) for p in paths)
        units = "ms" if kind == "latency-by-distance" else "Mbit/s"
        series.append(ExperimentSeries(label,
                                       tuple(p[0] for p in points),
                                       tuple(p[1] for p in points), units))
    return series


def plot_figure(kind: str, inputs: Inputs, out_image_path: str,
                ue_id: int = 0,
                warmup_ms: float = WARMUP_MS) -> list[ExperimentSeries]:
    """Render one figure to out_image_path and return the series drawn."""
    series = build_series(kind, inputs, ue_id, warmup_ms)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    if kind == "throughput-by-metric":
        ax.bar([s.x[0] for s in series], [s.y[0] for s in series],
               width=0.6, color="tab:blue")
        ax.set_xticks([s.x[0] for s in series])
        ax.set_xticklabels([s.label for s in series])
    else:
        for s in series:
            ax.plot(s.x, s.y, marker="o", label=s.label)
        ax.legend()
    xlabel, ylabel = _AXES[kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(kind)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_image_path, dpi=120)
    plt.close(fig)
    return series
