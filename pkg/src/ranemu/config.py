"""Scenario configuration: schema, validation and derived carrier geometry.

A scenario is a YAML mapping with a ``schema_version`` key and the sections
``carrier``, ``duplex``, ``scheduler``, ``csi``, ``channel``, ``radio``,
``interferers``, ``harq``, ``buffers``, ``run`` and ``ues``.  Every knob has a
documented default; :func:`load_scenario` fills defaults in, validates, and
returns an immutable :class:`ScenarioConfig`.  ``ScenarioConfig.to_dict`` is
the exact inverse, so load -> serialize -> load round-trips to an identical
object.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import yaml

SCHEMA_VERSION = 1

# Fraction of carrier bandwidth reserved as guard band when the PRB count is
# derived from bandwidth instead of being given explicitly.
DEFAULT_GUARD_FRACTION = 0.02

# Named priority levels; UE configs may use these instead of a raw weight.
PRIORITY_LADDER = {"none": 1.0, "medium": 2.0, "high": 4.0, "max": 8.0}

# Nominal RBG size (P) per bandwidth-part size, 3GPP TS 38.214
# Table 5.1.2.2.1-1, configuration 1.
_RBG_SIZE_TABLE = ((36, 2), (72, 4), (144, 8), (275, 16))

SUBCARRIERS_PER_PRB = 12
TICK_MS = 1.0


class ConfigError(ValueError):
    """Scenario rejected at load; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class Direction(enum.Enum):
    DL = "DL"
    UL = "UL"


class DuplexMode(enum.Enum):
    FDD = "fdd"
    TDD = "tdd"


class SchedulerMetric(enum.Enum):
    FIFO = "fifo"
    PF = "pf"
    BET = "bet"
    MT = "mt"


class CsiMode(enum.Enum):
    WIDEBAND = "wideband"
    SUBBAND = "subband"


class ChannelScenario(enum.Enum):
    UMA = "uma"
    UMI = "umi"
    INH = "inh"


class RunMode(enum.Enum):
    FAST = "fast"
    REALTIME = "realtime"


class TrafficKind(enum.Enum):
    SIMULATED = "simulated"
    CAPTURED = "captured"


class MobilityModel(enum.Enum):
    STATIC = "static"
    RANDOM_WALK = "random_walk"
    WAYPOINT = "waypoint"
    MANHATTAN = "manhattan"


def derive_prb_count(bandwidth_hz: float, numerology_mu: int,
                     guard_fraction: float = DEFAULT_GUARD_FRACTION,
                     override: Optional[int] = None) -> int:
    """PRB count for a carrier: the override when given, else the usable
    bandwidth after the guard fraction divided by one PRB's width."""
    if override is not None:
        return int(override)
    scs_hz = 15_000.0 * (2 ** numerology_mu)
    return int(math.floor(bandwidth_hz * (1.0 - guard_fraction)
                          / (SUBCARRIERS_PER_PRB * scs_hz)))


def rbg_size_for(prb_count: int) -> int:
    """Nominal RBG size for a bandwidth part of ``prb_count`` PRBs."""
    for upper, size in _RBG_SIZE_TABLE:
        if prb_count <= upper:
            return size
    return _RBG_SIZE_TABLE[-1][1]


@dataclass(frozen=True)
class CarrierConfig:
    frequency_hz: float = 3.5e9
    dl_bandwidth_hz: float = 40e6
    ul_bandwidth_hz: float = 40e6
    numerology_mu: int = 1
    guard_fraction: float = DEFAULT_GUARD_FRACTION
    prb_count_override: Optional[int] = None
    rbg_grouping: bool = True
    num_carriers: int = 1


@dataclass(frozen=True)
class DuplexConfig:
    mode: DuplexMode = DuplexMode.FDD
    tdd_pattern: str = ""


@dataclass(frozen=True)
class SchedulerConfig:
    metric: SchedulerMetric = SchedulerMetric.PF
    ema_alpha: float = 0.01


@dataclass(frozen=True)
class CsiConfig:
    mode: CsiMode = CsiMode.WIDEBAND
    subband_size_rbs: int = 8


@dataclass(frozen=True)
class ChannelConfig:
    scenario: ChannelScenario = ChannelScenario.UMA
    # Serving gNB antenna position; z defaults to the scenario's BS height.
    gnb_position_m: tuple[float, float, float] = (0.0, 0.0, 25.0)
    # The stochastic terms can be pinned to zero for reproducible studies.
    shadowing_enabled: bool = True
    fading_enabled: bool = True


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 30.0
    antenna_gain_tx_dbi: float = 10.0
    antenna_gain_rx_dbi: float = 0.0
    noise_dbm: float = -95.0
    scaling_factor: float = 1.0     # rate-matching scale, (0, 1]
    overhead: float = 0.14          # resource overhead share, [0, 1)
    mcs_table_path: Optional[str] = None


@dataclass(frozen=True)
class InterfererConfig:
    position_m: tuple[float, float, float]
    tx_power_dbm: float
    frequency_hz: float


@dataclass(frozen=True)
class HarqConfig:
    error_reduction_factor: float = 0.5   # retransmission soft-combining gain
    max_retransmissions: int = 4
    rtt_slots: int = 8
    processing_delay_ms: float = 3.0
    bler_target: float = 0.1
    bler_table_path: Optional[str] = None


@dataclass(frozen=True)
class BufferConfig:
    ip_capacity_bits: int = 3_000_000     # per UE, per direction


@dataclass(frozen=True)
class SimulatedTraffic:
    dl_target_bps: float = 0.0
    ul_target_bps: float = 0.0
    packet_size_bits: int = 12_000
    jitter_std_fraction: float = 0.05


@dataclass(frozen=True)
class CapturedTraffic:
    dl_queue_num: int = 0
    ul_queue_num: int = 1


@dataclass(frozen=True)
class MobilityConfig:
    model: MobilityModel = MobilityModel.STATIC
    speed_mps: float = 0.0
    initial_heading_deg: float = 0.0
    heading_sigma_deg: float = 5.0        # random-walk heading noise per tick
    waypoints: tuple[tuple[float, float, float], ...] = ()
    arrival_tolerance_m: float = 0.5
    grid_step_m: float = 50.0             # Manhattan block size
    turn_probability: float = 0.25        # per side, at each intersection


@dataclass(frozen=True)
class UeConfig:
    ue_id: int
    traffic: SimulatedTraffic | CapturedTraffic = field(
        default_factory=SimulatedTraffic)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    initial_position_m: tuple[float, float, float] = (100.0, 0.0, 1.5)
    priority_weight: float = 1.0
    max_mimo_layers: int = 1
    los: bool = True
    # Testing hook: pin the reported SINR to a constant, bypassing the
    # pathloss/shadowing/fading chain entirely.
    sinr_override_db: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    mode: RunMode = RunMode.FAST
    duration_ms: int = 1000
    rng_seed: int = 1
    metrics_path: str = "metrics.csv"
    world_bounds_m: tuple[tuple[float, float], tuple[float, float]] = (
        (-5000.0, -5000.0), (5000.0, 5000.0))


@dataclass(frozen=True)
class ScenarioConfig:
    carrier: CarrierConfig = field(default_factory=CarrierConfig)
    duplex: DuplexConfig = field(default_factory=DuplexConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    csi: CsiConfig = field(default_factory=CsiConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    interferers: tuple[InterfererConfig, ...] = ()
    harq: HarqConfig = field(default_factory=HarqConfig)
    buffers: BufferConfig = field(default_factory=BufferConfig)
    run: RunConfig = field(default_factory=RunConfig)
    ues: tuple[UeConfig, ...] = ()

    # -- derived carrier geometry -------------------------------------------

    @property
    def slots_per_tick(self) -> int:
        return 2 ** self.carrier.numerology_mu

    @property
    def slot_duration_ms(self) -> float:
        return TICK_MS / self.slots_per_tick

    def prb_count(self, direction: Direction) -> int:
        bw = (self.carrier.dl_bandwidth_hz if direction is Direction.DL
              else self.carrier.ul_bandwidth_hz)
        return derive_prb_count(bw, self.carrier.numerology_mu,
                                self.carrier.guard_fraction,
                                self.carrier.prb_count_override)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["schema_version"] = SCHEMA_VERSION
        # asdict flattens the traffic union; keep its discriminator.
        for ue_raw, ue in zip(raw["ues"], self.ues):
            kind = (TrafficKind.CAPTURED
                    if isinstance(ue.traffic, CapturedTraffic)
                    else TrafficKind.SIMULATED)
            ue_raw["traffic"] = {"kind": kind.value, **ue_raw["traffic"]}
        return _plain(raw)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def _plain(obj):
    """Recursively turn enums/tuples into YAML-native values."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# -- parsing helpers ---------------------------------------------------------

def _num(raw: dict, key: str, path: str, default=None) -> float:
    val = raw.get(key, default)
    if val is None:
        raise ConfigError(f"{path}.{key}", "required numeric value missing")
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", f"not a number: {val!r}") from None


def _int(raw: dict, key: str, path: str, default=None) -> int:
    val = _num(raw, key, path, default)
    if val != int(val):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {val}")
    return int(val)


def _bool(raw: dict, key: str, path: str, default: bool) -> bool:
    val = raw.get(key, default)
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key}", f"expected true/false, got {val!r}")
    return val


def _enum(raw: dict, key: str, path: str, kind, default):
    val = raw.get(key, default)
    if isinstance(val, kind):
        return val
    try:
        return kind(str(val).lower())
    except ValueError:
        options = ", ".join(m.value for m in kind)
        raise ConfigError(f"{path}.{key}",
                          f"unknown value {val!r} (one of: {options})") from None


def _vec3(raw, key: str, path: str, default=None) -> tuple[float, float, float]:
    val = raw.get(key, default) if isinstance(raw, dict) else raw
    if val is None:
        raise ConfigError(f"{path}.{key}", "required 3-vector missing")
    if not isinstance(val, (list, tuple)) or len(val) != 3:
        raise ConfigError(f"{path}.{key}", f"expected [x, y, z], got {val!r}")
    return tuple(float(v) for v in val)


def _section(raw: dict, key: str) -> dict:
    val = raw.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(key, f"expected a mapping, got {val!r}")
    return val


# -- per-section parsers -----------------------------------------------------

def _parse_carrier(raw: dict) -> CarrierConfig:
    sec = _section(raw, "carrier")
    override = sec.get("prb_count_override")
    if override is not None:
        override = _int(sec, "prb_count_override", "carrier")
        if override < 1:
            raise ConfigError("carrier.prb_count_override", "must be >= 1")
    mu = _int(sec, "numerology_mu", "carrier", 1)
    if not 0 <= mu <= 3:
        raise ConfigError("carrier.numerology_mu", f"must be in 0..3, got {mu}")
    guard = _num(sec, "guard_fraction", "carrier", DEFAULT_GUARD_FRACTION)
    if not 0.0 <= guard < 1.0:
        raise ConfigError("carrier.guard_fraction", "must be in [0, 1)")
    carriers = _int(sec, "num_carriers", "carrier", 1)
    if carriers < 1:
        raise ConfigError("carrier.num_carriers", "must be >= 1")
    cfg = CarrierConfig(
        frequency_hz=_num(sec, "frequency_hz", "carrier", 3.5e9),
        dl_bandwidth_hz=_num(sec, "dl_bandwidth_hz", "carrier", 40e6),
        ul_bandwidth_hz=_num(sec, "ul_bandwidth_hz", "carrier", 40e6),
        numerology_mu=mu,
        guard_fraction=guard,
        prb_count_override=override,
        rbg_grouping=_bool(sec, "rbg_grouping", "carrier", True),
        num_carriers=carriers,
    )
    if cfg.frequency_hz <= 0:
        raise ConfigError("carrier.frequency_hz", "must be > 0")
    for key, bw in (("dl_bandwidth_hz", cfg.dl_bandwidth_hz),
                    ("ul_bandwidth_hz", cfg.ul_bandwidth_hz)):
        if bw <= 0:
            raise ConfigError(f"carrier.{key}", "must be > 0")
        if derive_prb_count(bw, mu, guard, override) < 1:
            raise ConfigError(
                f"carrier.{key}",
                f"bandwidth admits zero PRBs at numerology {mu}")
    return cfg


def _parse_duplex(raw: dict) -> DuplexConfig:
    sec = _section(raw, "duplex")
    mode = _enum(sec, "mode", "duplex", DuplexMode, DuplexMode.FDD.value)
    pattern = str(sec.get("tdd_pattern", "") or "")
    if mode is DuplexMode.TDD:
        if not pattern:
            raise ConfigError("duplex.tdd_pattern",
                              "required when duplex.mode is tdd")
        bad = set(pattern.upper()) - {"D", "U"}
        if bad:
            raise ConfigError("duplex.tdd_pattern",
                              f"only 'D' and 'U' allowed, got {sorted(bad)}")
        pattern = pattern.upper()
    elif pattern:
        raise ConfigError("duplex.tdd_pattern", "only meaningful with tdd mode")
    return DuplexConfig(mode=mode, tdd_pattern=pattern)


def _parse_scheduler(raw: dict) -> SchedulerConfig:
    sec = _section(raw, "scheduler")
    alpha = _num(sec, "ema_alpha", "scheduler", 0.01)
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("scheduler.ema_alpha", "must be in (0, 1]")
    return SchedulerConfig(
        metric=_enum(sec, "metric", "scheduler", SchedulerMetric,
                     SchedulerMetric.PF.value),
        ema_alpha=alpha,
    )


def _parse_csi(raw: dict) -> CsiConfig:
    sec = _section(raw, "csi")
    size = _int(sec, "subband_size_rbs", "csi", 8)
    if size < 1:
        raise ConfigError("csi.subband_size_rbs", "must be >= 1")
    return CsiConfig(
        mode=_enum(sec, "mode", "csi", CsiMode, CsiMode.WIDEBAND.value),
        subband_size_rbs=size,
    )


def _parse_channel(raw: dict) -> ChannelConfig:
    sec = _section(raw, "channel")
    scenario = _enum(sec, "scenario", "channel", ChannelScenario,
                     ChannelScenario.UMA.value)
    default_bs_height = {ChannelScenario.UMA: 25.0,
                         ChannelScenario.UMI: 10.0,
                         ChannelScenario.INH: 3.0}[scenario]
    gnb = sec.get("gnb_position_m")
    if gnb is None:
        gnb = (0.0, 0.0, default_bs_height)
    else:
        gnb = _vec3(sec, "gnb_position_m", "channel")
    return ChannelConfig(
        scenario=scenario,
        gnb_position_m=gnb,
        shadowing_enabled=_bool(sec, "shadowing_enabled", "channel", True),
        fading_enabled=_bool(sec, "fading_enabled", "channel", True),
    )


def _parse_radio(raw: dict) -> RadioConfig:
    sec = _section(raw, "radio")
    f = _num(sec, "scaling_factor", "radio", 1.0)
    if not 0.0 < f <= 1.0:
        raise ConfigError("radio.scaling_factor", "must be in (0, 1]")
    oh = _num(sec, "overhead", "radio", 0.14)
    if not 0.0 <= oh < 1.0:
        raise ConfigError("radio.overhead", "must be in [0, 1)")
    path = sec.get("mcs_table_path")
    return RadioConfig(
        tx_power_dbm=_num(sec, "tx_power_dbm", "radio", 30.0),
        antenna_gain_tx_dbi=_num(sec, "antenna_gain_tx_dbi", "radio", 10.0),
        antenna_gain_rx_dbi=_num(sec, "antenna_gain_rx_dbi", "radio", 0.0),
        noise_dbm=_num(sec, "noise_dbm", "radio", -95.0),
        scaling_factor=f,
        overhead=oh,
        mcs_table_path=str(path) if path is not None else None,
    )


def _parse_interferers(raw: dict) -> tuple[InterfererConfig, ...]:
    entries = raw.get("interferers") or []
    if not isinstance(entries, list):
        raise ConfigError("interferers", "expected a list")
    out = []
    for i, entry in enumerate(entries):
        path = f"interferers[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "expected a mapping")
        out.append(InterfererConfig(
            position_m=_vec3(entry, "position_m", path),
            tx_power_dbm=_num(entry, "tx_power_dbm", path),
            frequency_hz=_num(entry, "frequency_hz", path),
        ))
    return tuple(out)


def _parse_harq(raw: dict) -> HarqConfig:
    sec = _section(raw, "harq")
    r = _num(sec, "error_reduction_factor", "harq", 0.5)
    if not 0.0 <= r <= 1.0:
        raise ConfigError("harq.error_reduction_factor", "must be in [0, 1]")
    target = _num(sec, "bler_target", "harq", 0.1)
    if not 0.0 < target < 1.0:
        raise ConfigError("harq.bler_target", "must be in (0, 1)")
    max_retx = _int(sec, "max_retransmissions", "harq", 4)
    if max_retx < 0:
        raise ConfigError("harq.max_retransmissions", "must be >= 0")
    rtt = _int(sec, "rtt_slots", "harq", 8)
    if rtt < 1:
        raise ConfigError("harq.rtt_slots", "must be >= 1")
    delay = _num(sec, "processing_delay_ms", "harq", 3.0)
    if delay < 0:
        raise ConfigError("harq.processing_delay_ms", "must be >= 0")
    path = sec.get("bler_table_path")
    return HarqConfig(
        error_reduction_factor=r,
        max_retransmissions=max_retx,
        rtt_slots=rtt,
        processing_delay_ms=delay,
        bler_target=target,
        bler_table_path=str(path) if path is not None else None,
    )


def _parse_buffers(raw: dict) -> BufferConfig:
    sec = _section(raw, "buffers")
    cap = _int(sec, "ip_capacity_bits", "buffers", 3_000_000)
    if cap <= 0:
        raise ConfigError("buffers.ip_capacity_bits", "must be > 0")
    return BufferConfig(ip_capacity_bits=cap)


def _parse_run(raw: dict) -> RunConfig:
    sec = _section(raw, "run")
    duration = _int(sec, "duration_ms", "run", 1000)
    if duration <= 0:
        raise ConfigError("run.duration_ms", "must be > 0")
    bounds = sec.get("world_bounds_m")
    if bounds is None:
        bounds = ((-5000.0, -5000.0), (5000.0, 5000.0))
    else:
        try:
            (x0, y0), (x1, y1) = bounds
            bounds = ((float(x0), float(y0)), (float(x1), float(y1)))
        except (TypeError, ValueError):
            raise ConfigError("run.world_bounds_m",
                              f"expected [[x0, y0], [x1, y1]], got {bounds!r}"
                              ) from None
        if bounds[0][0] >= bounds[1][0] or bounds[0][1] >= bounds[1][1]:
            raise ConfigError("run.world_bounds_m", "min corner must be < max")
    return RunConfig(
        mode=_enum(sec, "mode", "run", RunMode, RunMode.FAST.value),
        duration_ms=duration,
        rng_seed=_int(sec, "rng_seed", "run", 1),
        metrics_path=str(sec.get("metrics_path", "metrics.csv")),
        world_bounds_m=bounds,
    )


def _parse_traffic(raw: dict, path: str) -> SimulatedTraffic | CapturedTraffic:
    sec = raw.get("traffic") or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}.traffic", "expected a mapping")
    kind = _enum(sec, "kind", f"{path}.traffic", TrafficKind,
                 TrafficKind.SIMULATED.value)
    if kind is TrafficKind.CAPTURED:
        return CapturedTraffic(
            dl_queue_num=_int(sec, "dl_queue_num", f"{path}.traffic"),
            ul_queue_num=_int(sec, "ul_queue_num", f"{path}.traffic"),
        )
    size = _int(sec, "packet_size_bits", f"{path}.traffic", 12_000)
    if size <= 0:
        raise ConfigError(f"{path}.traffic.packet_size_bits", "must be > 0")
    jitter = _num(sec, "jitter_std_fraction", f"{path}.traffic", 0.05)
    if jitter < 0:
        raise ConfigError(f"{path}.traffic.jitter_std_fraction",
                          "must be >= 0")
    tr = SimulatedTraffic(
        dl_target_bps=_num(sec, "dl_target_bps", f"{path}.traffic", 0.0),
        ul_target_bps=_num(sec, "ul_target_bps", f"{path}.traffic", 0.0),
        packet_size_bits=size,
        jitter_std_fraction=jitter,
    )
    if tr.dl_target_bps < 0 or tr.ul_target_bps < 0:
        raise ConfigError(f"{path}.traffic", "target rates must be >= 0")
    return tr


def _parse_mobility(raw: dict, path: str) -> MobilityConfig:
    sec = raw.get("mobility") or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}.mobility", "expected a mapping")
    model = _enum(sec, "model", f"{path}.mobility", MobilityModel,
                  MobilityModel.STATIC.value)
    speed = _num(sec, "speed_mps", f"{path}.mobility", 0.0)
    if speed < 0:
        raise ConfigError(f"{path}.mobility.speed_mps", "must be >= 0")
    waypoints = sec.get("waypoints") or []
    if model is MobilityModel.WAYPOINT and not waypoints:
        raise ConfigError(f"{path}.mobility.waypoints",
                          "waypoint model needs at least one target")
    wp = tuple(_vec3({"w": w}, "w", f"{path}.mobility.waypoints")
               for w in waypoints)
    tol = _num(sec, "arrival_tolerance_m", f"{path}.mobility", 0.5)
    if tol <= 0:
        raise ConfigError(f"{path}.mobility.arrival_tolerance_m",
                          "must be > 0")
    step = _num(sec, "grid_step_m", f"{path}.mobility", 50.0)
    if step <= 0:
        raise ConfigError(f"{path}.mobility.grid_step_m", "must be > 0")
    turn = _num(sec, "turn_probability", f"{path}.mobility", 0.25)
    if not 0.0 <= turn <= 0.5:
        raise ConfigError(f"{path}.mobility.turn_probability",
                          "must be in [0, 0.5] (applied per side)")
    return MobilityConfig(
        model=model,
        speed_mps=speed,
        initial_heading_deg=_num(sec, "initial_heading_deg",
                                 f"{path}.mobility", 0.0),
        heading_sigma_deg=_num(sec, "heading_sigma_deg",
                               f"{path}.mobility", 5.0),
        waypoints=wp,
        arrival_tolerance_m=tol,
        grid_step_m=step,
        turn_probability=turn,
    )


def _parse_ue(entry: dict, index: int) -> UeConfig:
    path = f"ues[{index}]"
    if not isinstance(entry, dict):
        raise ConfigError(path, "expected a mapping")
    ue_id = _int(entry, "ue_id", path)
    if ue_id < 0:
        raise ConfigError(f"{path}.ue_id", "must be >= 0")
    weight = entry.get("priority_weight", 1.0)
    if isinstance(weight, str):
        if weight not in PRIORITY_LADDER:
            raise ConfigError(f"{path}.priority_weight",
                              f"unknown level {weight!r} "
                              f"(one of: {', '.join(PRIORITY_LADDER)})")
        weight = PRIORITY_LADDER[weight]
    weight = float(weight)
    if weight <= 0:
        raise ConfigError(f"{path}.priority_weight", "must be > 0")
    layers = _int(entry, "max_mimo_layers", path, 1)
    if not 1 <= layers <= 4:
        raise ConfigError(f"{path}.max_mimo_layers", "must be in 1..4")
    override = entry.get("sinr_override_db")
    return UeConfig(
        ue_id=ue_id,
        traffic=_parse_traffic(entry, path),
        mobility=_parse_mobility(entry, path),
        initial_position_m=_vec3(entry, "initial_position_m", path,
                                 (100.0, 0.0, 1.5)),
        priority_weight=weight,
        max_mimo_layers=layers,
        los=_bool(entry, "los", path, True),
        sinr_override_db=float(override) if override is not None else None,
    )


def from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a plain mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version",
                          f"expected {SCHEMA_VERSION}, got {version!r}")

    ue_entries = raw.get("ues") or []
    if not isinstance(ue_entries, list):
        raise ConfigError("ues", "expected a list")
    ues = tuple(_parse_ue(entry, i) for i, entry in enumerate(ue_entries))

    seen_ids: set[int] = set()
    seen_queues: set[int] = set()
    for i, ue in enumerate(ues):
        if ue.ue_id in seen_ids:
            raise ConfigError(f"ues[{i}].ue_id",
                              f"duplicate ue_id {ue.ue_id}")
        seen_ids.add(ue.ue_id)
        if isinstance(ue.traffic, CapturedTraffic):
            for key, q in (("dl_queue_num", ue.traffic.dl_queue_num),
                           ("ul_queue_num", ue.traffic.ul_queue_num)):
                if q in seen_queues:
                    raise ConfigError(f"ues[{i}].traffic.{key}",
                                      f"queue number {q} already in use")
                seen_queues.add(q)

    return ScenarioConfig(
        carrier=_parse_carrier(raw),
        duplex=_parse_duplex(raw),
        scheduler=_parse_scheduler(raw),
        csi=_parse_csi(raw),
        channel=_parse_channel(raw),
        radio=_parse_radio(raw),
        interferers=_parse_interferers(raw),
        harq=_parse_harq(raw),
        buffers=_parse_buffers(raw),
        run=_parse_run(raw),
        ues=ues,
    )


def loads(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<root>", f"not valid YAML: {exc}") from None
    return from_dict(raw)


def load_scenario(path: str) -> ScenarioConfig:
    """Read, default-fill and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return loads(text)
