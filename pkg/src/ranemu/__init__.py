"""ranemu: a real-time 5G RAN emulator.

Emulates a single gNB serving many UEs at 1 ms resolution: synthetic or
captured IP traffic, a per-direction OFDMA resource grid with pluggable
scheduling metrics, AMC over configurable BLER curves, HARQ
retransmissions, statistical channel models and per-tick metrics output.
"""

from .config import (ConfigError, Direction, RunMode, ScenarioConfig,
                     SchedulerMetric, load_scenario, loads)
from .engine import Engine, RunSummary, run_scenario
from .metrics import MetricsSinkError
from .traffic import CaptureError, InMemoryCaptureAdapter, Verdict, VerdictError

__version__ = "0.1.0"

__all__ = [
    "CaptureError",
    "ConfigError",
    "Direction",
    "Engine",
    "InMemoryCaptureAdapter",
    "MetricsSinkError",
    "RunMode",
    "RunSummary",
    "ScenarioConfig",
    "SchedulerMetric",
    "Verdict",
    "VerdictError",
    "__version__",
    "load_scenario",
    "loads",
    "run_scenario",
]
