"""PHY abstraction: link budget, BLER curves, CSI reporting and rank choice.

Large-scale loss comes from :mod:`ranemu.pathloss`; on top of it sit
spatially correlated log-normal shadowing and per-refresh Rayleigh fading
(power drawn from Exp(1), i.e. 10*log10(h) in dB).  SINR, MCS, CQI and RI
are recomputed whenever the channel coherence time expires; between
refreshes the reported state is constant.

BLER curves are logistic stand-ins by default (midpoints 1.9 dB apart,
slope 1.5 per dB) and can be replaced by a measured table from CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import pathloss as plmod
from .config import ChannelScenario, CsiMode, Direction
from .mac import McsTable

SPEED_OF_LIGHT = plmod.SPEED_OF_LIGHT

# Default logistic BLER family: bler(s) = 1 / (1 + exp(slope * (s - mid_m))).
LOGISTIC_MIDPOINT_BASE_DB = -6.0
LOGISTIC_MIDPOINT_STEP_DB = 1.9
LOGISTIC_SLOPE_PER_DB = 1.5

# Clarke-model coherence time, clamped to a sane refresh interval.
COHERENCE_FACTOR = 0.423
MIN_COHERENCE_MS = 1.0
MAX_COHERENCE_MS = 1000.0


class BlerTableError(ValueError):
    pass


class BlerTable:
    """Monotone per-MCS map sinr_db -> BLER in [0, 1].

    Outside a loaded curve's SINR span the limits apply: 1 below, 0 above.
    """

    def __init__(self, curves: list[tuple[np.ndarray, np.ndarray]] = None,
                 n_mcs: int = 28, logistic: bool = True):
        self.n_mcs = n_mcs
        self._curves = curves
        self._logistic = logistic and curves is None
        if self._logistic:
            self._mid = (LOGISTIC_MIDPOINT_BASE_DB
                         + LOGISTIC_MIDPOINT_STEP_DB * np.arange(n_mcs))

    def __len__(self) -> int:
        return self.n_mcs

    def bler(self, mcs: int, sinr_db: float) -> float:
        if self._logistic:
            x = LOGISTIC_SLOPE_PER_DB * (sinr_db - self._mid[mcs])
            # guard exp overflow at both extremes
            if x < -700.0:
                return 1.0
            if x > 700.0:
                return 0.0
            return 1.0 / (1.0 + math.exp(x))
        sinr, bler = self._curves[mcs]
        if sinr_db < sinr[0]:
            return 1.0
        if sinr_db > sinr[-1]:
            return 0.0
        return float(np.interp(sinr_db, sinr, bler))

    def threshold_sinr(self, mcs: int, target: float) -> float:
        """Smallest SINR at which this MCS meets the BLER target; +inf when
        the loaded curve never gets there."""
        if self._logistic:
            return (self._mid[mcs]
                    + math.log((1.0 - target) / target) / LOGISTIC_SLOPE_PER_DB)
        sinr, bler = self._curves[mcs]
        idx = np.nonzero(bler <= target)[0]
        if len(idx) == 0:
            return math.inf
        i = int(idx[0])
        if i == 0:
            return float(sinr[0])
        # linear crossing between the first pair straddling the target
        frac = (bler[i - 1] - target) / (bler[i - 1] - bler[i])
        return float(sinr[i - 1] + frac * (sinr[i] - sinr[i - 1]))

    @classmethod
    def default_logistic(cls, n_mcs: int = 28) -> "BlerTable":
        return cls(n_mcs=n_mcs)

    @classmethod
    def load(cls, path: str, n_mcs: int = 28) -> "BlerTable":
        """CSV columns: mcs,sinr_db,bler. Rejects gaps, unsorted SINR and
        non-monotone (increasing) BLER."""
        rows: dict[int, list[tuple[float, float]]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            reader = csv.DictReader(
                line for line in fh if line.strip() and not line.startswith("#"))
            for row in reader:
                try:
                    mcs = int(row["mcs"])
                    rows.setdefault(mcs, []).append(
                        (float(row["sinr_db"]), float(row["bler"])))
                except (KeyError, TypeError, ValueError) as exc:
                    raise BlerTableError(f"bad row {row!r}: {exc}") from None
        curves = []
        for mcs in range(n_mcs):
            if mcs not in rows or len(rows[mcs]) < 2:
                raise BlerTableError(f"MCS {mcs}: need at least two points")
            pts = rows[mcs]
            sinr = np.array([p[0] for p in pts])
            bler = np.array([p[1] for p in pts])
            if np.any(np.diff(sinr) <= 0):
                raise BlerTableError(
                    f"MCS {mcs}: SINR points must be strictly increasing")
            if np.any(np.diff(bler) > 0):
                raise BlerTableError(
                    f"MCS {mcs}: BLER must be non-increasing in SINR")
            if bler.min() < 0.0 or bler.max() > 1.0:
                raise BlerTableError(f"MCS {mcs}: BLER outside [0, 1]")
            curves.append((sinr, bler))
        return cls(curves=curves, n_mcs=n_mcs, logistic=False)


class AmcSelector:
    """Precomputed MCS choice: highest index meeting the BLER target.

    ``floors[m]`` is the suffix-minimum of the per-MCS target thresholds,
    which is non-decreasing, so a binary search gives the same answer as
    scanning all curves."""

    def __init__(self, bler_table: BlerTable, bler_target: float):
        thr = np.array([bler_table.threshold_sinr(m, bler_target)
                        for m in range(len(bler_table))])
        self.thresholds = thr
        self.floors = np.minimum.accumulate(thr[::-1])[::-1]
        self.bler_target = bler_target

    def select(self, sinr_db) -> np.ndarray | int:
        idx = np.searchsorted(self.floors, np.asarray(sinr_db, dtype=float),
                              side="right") - 1
        idx = np.maximum(idx, 0)
        return idx if idx.ndim else int(idx)


# -- link budget ---------------------------------------------------------------

@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float
    antenna_gain_tx_dbi: float
    antenna_gain_rx_dbi: float
    noise_dbm: float
    interference_dbm: float   # -inf when no interferer is configured


def received_power_dbm(budget: LinkBudget, pathloss_db: float,
                       shadowing_db: float = 0.0,
                       fading_db: float = 0.0) -> float:
    return (budget.tx_power_dbm + budget.antenna_gain_tx_dbi
            + budget.antenna_gain_rx_dbi - pathloss_db - shadowing_db
            + fading_db)


def sinr_db(rsp_dbm: float, noise_dbm: float,
            interference_dbm: float = -math.inf) -> float:
    noise_mw = 10.0 ** (noise_dbm / 10.0)
    interf_mw = (0.0 if interference_dbm == -math.inf
                 else 10.0 ** (interference_dbm / 10.0))
    return rsp_dbm - 10.0 * math.log10(noise_mw + interf_mw)


def rsrp_dbm(rsp_dbm: float, prb_count: int) -> float:
    """Per-resource-element reference power over the whole carrier."""
    return rsp_dbm - 10.0 * math.log10(12 * prb_count)


def interference_init(interferers, gnb_position_m, scenario: ChannelScenario,
                      carrier_frequency_hz: float, bandwidth_hz: float,
                      antenna_gain_tx_dbi: float,
                      antenna_gain_rx_dbi: float) -> float:
    """Aggregate interference power, fixed for the whole run.

    Power-sum of each co-channel interferer's mean received power (LOS, no
    stochastic terms) at the serving gNB position.  Interferers more than
    half a carrier away in frequency are ignored.
    """
    total_mw = 0.0
    gx, gy, gz = gnb_position_m
    for itf in interferers:
        if abs(itf.frequency_hz - carrier_frequency_hz) > bandwidth_hz / 2.0:
            continue
        ix, iy, iz = itf.position_m
        dist = math.sqrt((ix - gx) ** 2 + (iy - gy) ** 2 + (iz - gz) ** 2)
        pl = plmod.pathloss_db(scenario, dist, itf.frequency_hz, los=True)
        rsp = (itf.tx_power_dbm + antenna_gain_tx_dbi + antenna_gain_rx_dbi
               - pl)
        total_mw += 10.0 ** (rsp / 10.0)
    if total_mw == 0.0:
        return -math.inf
    return 10.0 * math.log10(total_mw)


def correlation_time_ms(speed_mps: float, carrier_frequency_hz: float) -> float:
    """Clarke coherence time in ms, clamped to [1, 1000]."""
    if speed_mps <= 0.0:
        return MAX_COHERENCE_MS
    doppler_hz = speed_mps * carrier_frequency_hz / SPEED_OF_LIGHT
    tc_ms = 1000.0 * COHERENCE_FACTOR / doppler_hz
    return min(max(tc_ms, MIN_COHERENCE_MS), MAX_COHERENCE_MS)


# -- rank lookup ---------------------------------------------------------------

def rank_thresholds(selector: AmcSelector, mcs_table: McsTable,
                    max_layers: int = 4,
                    grid_db=(-20.0, 60.0, 0.1)) -> np.ndarray:
    """SINR thresholds above which each layer count wins the sum-rate race.

    Transmit power splits evenly across layers, so L layers run each stream
    at sinr - 10*log10(L); a layer count is worthwhile once its summed
    efficiency beats every smaller count.  Efficiency counts as zero when
    even MCS 0 misses the BLER target.  thresholds[0] (one layer) is -inf.
    """
    lo, hi, step = grid_db
    grid = np.arange(lo, hi + step, step)
    effs = mcs_table.qm * mcs_table.rate
    floor0 = selector.floors[0]

    def sum_rate(layers: int) -> np.ndarray:
        per_layer = grid - 10.0 * math.log10(layers)
        rate = layers * effs[selector.select(per_layer)]
        return np.where(per_layer < floor0, 0.0, rate)

    rates = np.vstack([sum_rate(layers) for layers in
                       range(1, max_layers + 1)])
    thresholds = np.full(max_layers, -math.inf)
    for li in range(1, max_layers):
        best_smaller = rates[:li].max(axis=0)
        wins = rates[li] >= np.maximum(best_smaller, 1e-12)
        # stable qualification: the lowest grid point from which the layer
        # count keeps winning all the way up
        stable = np.logical_and.accumulate(wins[::-1])[::-1]
        idx = np.nonzero(stable)[0]
        thresholds[li] = grid[idx[0]] if len(idx) else math.inf
    # more layers never become attractive earlier than fewer layers
    return np.maximum.accumulate(thresholds)


def rank_lookup(sinr_db_value: float, max_layers: int,
                thresholds: np.ndarray) -> int:
    """Largest layer count within ``max_layers`` whose threshold is met."""
    ri = 1
    for li in range(1, min(max_layers, len(thresholds))):
        if sinr_db_value >= thresholds[li]:
            ri = li + 1
    return ri


# -- per-UE channel state --------------------------------------------------------

@dataclass
class ChannelState:
    sinr_subband_db: np.ndarray     # one entry per sub-band (1 for wideband)
    wideband_sinr_db: float
    rsrp_dbm: float
    mcs_subband: np.ndarray
    mcs: int
    cqi: int
    ri: int
    pathloss_db: float
    shadowing_db: float
    correlation_time_ms: float
    next_refresh_ms: float


class _ShadowProcess:
    """Gudmundson-style spatially correlated log-normal shadowing."""

    def __init__(self, sigma_db: float, corr_dist_m: float, position,
                 rng: np.random.Generator, enabled: bool):
        self.sigma = sigma_db
        self.corr_dist = corr_dist_m
        self.enabled = enabled
        self.last_xy = (position[0], position[1])
        self.value_db = float(rng.normal(0.0, sigma_db)) if enabled else 0.0

    def update(self, position, rng: np.random.Generator) -> float:
        if not self.enabled:
            return 0.0
        dx = position[0] - self.last_xy[0]
        dy = position[1] - self.last_xy[1]
        dist = math.hypot(dx, dy)
        if dist > 0.0:
            rho = math.exp(-dist / self.corr_dist)
            innov = rng.normal(0.0, self.sigma)
            self.value_db = rho * self.value_db + math.sqrt(1.0 - rho * rho) * innov
            self.last_xy = (position[0], position[1])
        return self.value_db


class UeChannel:
    """CSI pipeline for one UE in one direction.

    ``report`` refreshes the state when the coherence time has expired and
    otherwise returns the cached report unchanged.
    """

    def __init__(self, *, ue_cfg, scenario: ChannelScenario, budget: LinkBudget,
                 gnb_position_m, carrier_frequency_hz: float, prb_count: int,
                 csi_mode: CsiMode, subband_size_rbs: int,
                 selector: AmcSelector, mcs_table: McsTable,
                 rank_thresholds_db: np.ndarray, fading_enabled: bool,
                 shadowing_enabled: bool, rng: np.random.Generator):
        self.ue_cfg = ue_cfg
        self.scenario = scenario
        self.budget = budget
        self.gnb = gnb_position_m
        self.freq_hz = carrier_frequency_hz
        self.prb_count = prb_count
        self.n_subbands = (1 if csi_mode is CsiMode.WIDEBAND
                           else math.ceil(prb_count / subband_size_rbs))
        self.subband_size = subband_size_rbs
        self.selector = selector
        self.mcs_table = mcs_table
        self.rank_thr = rank_thresholds_db
        self.fading_enabled = fading_enabled
        self.rng = rng
        self.coherence_ms = correlation_time_ms(
            ue_cfg.mobility.speed_mps, carrier_frequency_hz)
        self._shadow = _ShadowProcess(
            plmod.shadow_sigma_db(scenario, ue_cfg.los),
            plmod.shadow_corr_distance_m(scenario, ue_cfg.los),
            ue_cfg.initial_position_m, rng, shadowing_enabled)
        self.state: Optional[ChannelState] = None

    def report(self, now_ms: float, position) -> ChannelState:
        if self.state is None or now_ms >= self.state.next_refresh_ms:
            self._refresh(now_ms, position)
        return self.state

    def _refresh(self, now_ms: float, position) -> None:
        budget = self.budget
        noise_floor = sinr_db(0.0, budget.noise_dbm, budget.interference_dbm)
        # noise_floor is -10log10(noise+interference) with rsp = 0
        if self.ue_cfg.sinr_override_db is not None:
            sinr = np.full(self.n_subbands, float(self.ue_cfg.sinr_override_db))
            pl = 0.0
            shadow = 0.0
            rsp = self.ue_cfg.sinr_override_db - noise_floor
        else:
            gx, gy, gz = self.gnb
            dist = math.sqrt((position[0] - gx) ** 2 + (position[1] - gy) ** 2
                             + (position[2] - gz) ** 2)
            pl = plmod.pathloss_db(self.scenario, dist, self.freq_hz,
                                   self.ue_cfg.los)
            shadow = self._shadow.update(position, self.rng)
            if self.fading_enabled:
                draw = self.rng.exponential(1.0, size=self.n_subbands)
                fading = 10.0 * np.log10(np.maximum(draw, 1e-300))
            else:
                fading = np.zeros(self.n_subbands)
            rsp_vec = (received_power_dbm(budget, pl, shadow) + fading)
            sinr = rsp_vec + noise_floor
            rsp = float(10.0 * np.log10(np.mean(10.0 ** (rsp_vec / 10.0))))
        wideband = float(10.0 * np.log10(np.mean(10.0 ** (sinr / 10.0))))
        mcs_sub = np.atleast_1d(self.selector.select(sinr)).astype(np.int64)
        mcs = int(self.selector.select(wideband))
        ri = rank_lookup(wideband, self.ue_cfg.max_mimo_layers, self.rank_thr)
        self.state = ChannelState(
            sinr_subband_db=np.asarray(sinr, dtype=float),
            wideband_sinr_db=wideband,
            rsrp_dbm=rsrp_dbm(rsp, self.prb_count),
            mcs_subband=mcs_sub,
            mcs=mcs,
            cqi=self.mcs_table.cqi_for(mcs),
            ri=ri,
            pathloss_db=pl,
            shadowing_db=shadow,
            correlation_time_ms=self.coherence_ms,
            next_refresh_ms=now_ms + self.coherence_ms,
        )

    def subband_of_rbg(self, rbg_index: int, rbg_sizes) -> int:
        if self.n_subbands == 1:
            return 0
        first_prb = sum(rbg_sizes[:rbg_index])
        return min(first_prb // self.subband_size, self.n_subbands - 1)
