"""MAC layer: resource grids, transport-block sizing, AMC and the scheduler.

The scheduler works on a per-tick resource grid of (slot, RBG) cells.  Every
cell is assigned to the UE maximizing the configured metric (FIFO, PF, BET or
MT), each weighted by the UE's priority; the winning UE receives a transport
block sized by the standard rate formula

    bits = layers * Q_m * f * R * 12 * symbols * (1 - overhead)

floored and multiplied by the number of resource blocks in the RBG.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .config import (Direction, DuplexMode, SchedulerMetric,
                     SUBCARRIERS_PER_PRB, rbg_size_for)

SYMBOLS_PER_SLOT = 14

# Floor applied to the throughput average in rate-normalizing metrics so a
# never-served UE has a finite, very large metric instead of a zero division.
EPS_THROUGHPUT_BPS = 1e-3


class McsTableError(ValueError):
    pass


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation_order: int
    code_rate: float


class McsTable:
    """MCS index -> (modulation order, code rate), plus the CQI report map.

    The bundled table is 3GPP TS 38.214 Table 5.1.3.1-2 (256QAM, indices
    0..27); a replacement can be loaded from a CSV with columns
    ``mcs_index,modulation_order,code_rate_x1024``.
    """

    def __init__(self, entries: tuple[McsEntry, ...],
                 cqi_map: tuple[int, ...]):
        if not entries:
            raise McsTableError("MCS table is empty")
        for i, e in enumerate(entries):
            if e.index != i:
                raise McsTableError(
                    f"MCS indices must be contiguous from 0, got {e.index} "
                    f"at row {i}")
            if e.modulation_order not in (2, 4, 6, 8):
                raise McsTableError(
                    f"MCS {i}: modulation order {e.modulation_order} "
                    f"not one of 2/4/6/8")
            if not 0.0 < e.code_rate < 1.0:
                raise McsTableError(
                    f"MCS {i}: code rate {e.code_rate} outside (0, 1)")
        if len(cqi_map) != len(entries):
            raise McsTableError("CQI map length does not match MCS table")
        self.entries = entries
        self._cqi = cqi_map
        self.qm = np.array([e.modulation_order for e in entries], dtype=float)
        self.rate = np.array([e.code_rate for e in entries], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)

    def modulation_order(self, mcs: int) -> int:
        return self.entries[mcs].modulation_order

    def code_rate(self, mcs: int) -> float:
        return self.entries[mcs].code_rate

    def efficiency(self, mcs: int) -> float:
        e = self.entries[mcs]
        return e.modulation_order * e.code_rate

    def cqi_for(self, mcs: int) -> int:
        return self._cqi[mcs]

    @classmethod
    def _parse(cls, lines, cqi_map) -> "McsTable":
        entries = []
        reader = csv.DictReader(
            row for row in lines if row.strip() and not row.startswith("#"))
        for row in reader:
            try:
                entries.append(McsEntry(
                    index=int(row["mcs_index"]),
                    modulation_order=int(row["modulation_order"]),
                    code_rate=float(row["code_rate_x1024"]) / 1024.0,
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise McsTableError(f"bad MCS table row {row!r}: {exc}") from None
        return cls(tuple(entries), cqi_map)

    @classmethod
    def load(cls, path: str) -> "McsTable":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        table = cls._parse(lines, _bundled_cqi_map())
        if len(table) != len(table._cqi):
            raise McsTableError("loaded table size does not match CQI map")
        return table

    @classmethod
    def bundled(cls) -> "McsTable":
        text = (resources.files("ranemu.data") / "mcs_table.csv").read_text()
        return cls._parse(text.splitlines(), _bundled_cqi_map())


def _bundled_cqi_map() -> tuple[int, ...]:
    text = (resources.files("ranemu.data") / "mcs_to_cqi.csv").read_text()
    reader = csv.DictReader(
        row for row in text.splitlines()
        if row.strip() and not row.startswith("#"))
    pairs = sorted((int(r["mcs_index"]), int(r["cqi"])) for r in reader)
    return tuple(cqi for _, cqi in pairs)


# -- transport block sizing ---------------------------------------------------

def tbs_bits(layers: int, modulation_order: int, scaling_factor: float,
             code_rate: float, symbols: int, overhead: float,
             rbs_per_rbg: int = 1) -> int:
    """Transport block size for one (slot, RBG) cell, in bits."""
    per_rb = math.floor(layers * modulation_order * scaling_factor * code_rate
                        * SUBCARRIERS_PER_PRB * symbols * (1.0 - overhead))
    return int(per_rb) * rbs_per_rbg


# -- resource grid ------------------------------------------------------------

def rbg_layout(prb_count: int, grouping: bool) -> tuple[int, ...]:
    """Sizes of each RBG across the carrier; the last group may be short."""
    if not grouping:
        return (1,) * prb_count
    size = rbg_size_for(prb_count)
    full, rem = divmod(prb_count, size)
    layout = [size] * full
    if rem:
        layout.append(rem)
    return tuple(layout)


def tdd_symbols(slot_tag: str, direction: Direction) -> int:
    """Symbols usable by ``direction`` in a slot tagged 'D' or 'U'."""
    wanted = "D" if direction is Direction.DL else "U"
    return SYMBOLS_PER_SLOT if slot_tag == wanted else 0


@dataclass(frozen=True)
class ResourceGrid:
    direction: Direction
    prb_count: int
    slots_per_tick: int
    rbg_sizes: tuple[int, ...]
    slot_symbols: tuple[int, ...]   # per slot: 14, or 0 when the duplex
                                    # pattern hands the slot to the other side

    @property
    def n_rbgs(self) -> int:
        return len(self.rbg_sizes)


def build_grid(direction: Direction, prb_count: int, slots_per_tick: int,
               grouping: bool, duplex_mode: DuplexMode, tdd_pattern: str,
               tick_index: int) -> ResourceGrid:
    """Grid for one tick; TDD slots are tagged by cycling the pattern over
    the absolute slot index."""
    layout = rbg_layout(prb_count, grouping)
    if duplex_mode is DuplexMode.FDD:
        symbols = (SYMBOLS_PER_SLOT,) * slots_per_tick
    else:
        base = tick_index * slots_per_tick
        symbols = tuple(
            tdd_symbols(tdd_pattern[(base + s) % len(tdd_pattern)], direction)
            for s in range(slots_per_tick))
    return ResourceGrid(direction=direction, prb_count=prb_count,
                        slots_per_tick=slots_per_tick, rbg_sizes=layout,
                        slot_symbols=symbols)


# -- AMC ----------------------------------------------------------------------

def amc_select(bler_table, sinr_db: float, bler_target: float) -> int:
    """Highest MCS whose BLER at ``sinr_db`` is within the target; MCS 0
    when even the lowest index misses the target."""
    for mcs in range(len(bler_table) - 1, -1, -1):
        if bler_table.bler(mcs, sinr_db) <= bler_target:
            return mcs
    return 0


# -- scheduling metric ---------------------------------------------------------

def compute_metric(kind: SchedulerMetric, *, instantaneous_rate_bps: float,
                   avg_throughput_bps: float, hol_wait_ms: float,
                   priority_weight: float) -> float:
    """Per-UE, per-cell scheduling metric; the priority weight multiplies
    the base metric whatever the kind."""
    if kind is SchedulerMetric.FIFO:
        base = hol_wait_ms
    elif kind is SchedulerMetric.PF:
        base = instantaneous_rate_bps / max(avg_throughput_bps,
                                            EPS_THROUGHPUT_BPS)
    elif kind is SchedulerMetric.BET:
        base = 1.0 / max(avg_throughput_bps, EPS_THROUGHPUT_BPS)
    elif kind is SchedulerMetric.MT:
        base = instantaneous_rate_bps
    else:
        raise ValueError(f"unknown metric {kind!r}")
    return base * priority_weight


@dataclass
class TbsGrant:
    __slots__ = ("ue_id", "direction", "carrier", "slot", "rbg", "rbs",
                 "bits", "mcs", "layers", "sinr_db")
    ue_id: int
    direction: Direction
    carrier: int
    slot: int
    rbg: int
    rbs: int
    bits: int
    mcs: int
    layers: int
    sinr_db: float


class Scheduler:
    """Per-direction scheduler state and the per-cell allocation loop.

    UE arrays are ordered by ascending ue_id, which makes numpy's
    first-maximum argmax the required lowest-ue_id tie-break.
    """

    def __init__(self, metric: SchedulerMetric, ema_alpha: float,
                 ue_ids: list[int], priority_weights: list[float],
                 num_carriers: int = 1):
        if sorted(ue_ids) != list(ue_ids):
            raise ValueError("ue_ids must be sorted ascending")
        self.metric = metric
        self.ema_alpha = ema_alpha
        self.num_carriers = num_carriers
        self.ue_ids = np.array(ue_ids, dtype=np.int64)
        self.weights = np.array(priority_weights, dtype=float)
        self.avg_throughput_bps = np.full(len(ue_ids), EPS_THROUGHPUT_BPS)

    def allocate(self, grid: ResourceGrid, bits_by_rbg: np.ndarray,
                 pending_bits: np.ndarray, hol_wait_ms: np.ndarray,
                 per_cell_grant_cb=None) -> tuple[list[TbsGrant], np.ndarray]:
        """Assign every usable cell of ``grid`` for this tick.

        ``bits_by_rbg`` is (n_rbgs, n_ue): Eq-style TBS bits each UE would
        get from each RBG for a full 14-symbol slot.  ``pending_bits`` is
        consumed in place.  ``per_cell_grant_cb(grant)`` lets the caller fill
        in MCS/SINR bookkeeping per grant.  Returns the grant list and the
        per-UE granted-bits vector; call :meth:`finish_tick` afterwards.
        """
        n_ue = len(self.ue_ids)
        granted = np.zeros(n_ue)
        grants: list[TbsGrant] = []
        active = pending_bits > 0
        n_active = int(active.sum())
        if n_active == 0 or not any(grid.slot_symbols):
            return grants, granted

        rate = bits_by_rbg * (grid.slots_per_tick * 1000.0)
        t_floor = np.maximum(self.avg_throughput_bps, EPS_THROUGHPUT_BPS)
        kind = self.metric
        if kind is SchedulerMetric.MT:
            score = rate * self.weights
        elif kind is SchedulerMetric.PF:
            score = rate * (self.weights / t_floor)
        elif kind is SchedulerMetric.BET:
            score = self.weights / t_floor
        else:   # FIFO
            score = hol_wait_ms * self.weights
        # score is (n_rbgs, n_ue) for rate-aware metrics, (n_ue,) otherwise
        per_rbg_score = score.ndim == 2
        if per_rbg_score:
            score = np.ascontiguousarray(score)
            score[:, ~active] = -np.inf
        else:
            score = score.astype(float, copy=True)
            score[~active] = -np.inf

        bits_int = bits_by_rbg.astype(np.int64, copy=False)
        ue_ids = self.ue_ids
        for carrier in range(self.num_carriers):
            for slot, symbols in enumerate(grid.slot_symbols):
                if symbols == 0:
                    continue
                for rbg, rbs in enumerate(grid.rbg_sizes):
                    if n_active == 0:
                        break
                    col = score[rbg] if per_rbg_score else score
                    i = int(col.argmax())
                    if col[i] == -np.inf:
                        n_active = 0
                        break
                    bits = int(bits_int[rbg, i])
                    if bits <= 0:
                        continue
                    grant = TbsGrant(
                        ue_id=int(ue_ids[i]), direction=grid.direction,
                        carrier=carrier, slot=slot, rbg=rbg, rbs=rbs,
                        bits=bits, mcs=-1, layers=1, sinr_db=0.0)
                    if per_cell_grant_cb is not None:
                        per_cell_grant_cb(grant, i)
                    grants.append(grant)
                    granted[i] += bits
                    pending_bits[i] -= bits
                    if pending_bits[i] <= 0:
                        active[i] = False
                        n_active -= 1
                        if per_rbg_score:
                            score[:, i] = -np.inf
                        else:
                            score[i] = -np.inf
                if n_active == 0:
                    break
            if n_active == 0:
                break
        return grants, granted

    def finish_tick(self, granted_bits: np.ndarray) -> None:
        """Exponential moving average of per-tick served rate, in bits/s."""
        a = self.ema_alpha
        self.avg_throughput_bps *= (1.0 - a)
        self.avg_throughput_bps += a * (granted_bits * 1000.0)
