"""Shared scenario builders for the test suite."""

from __future__ import annotations

from ranemu import config as cfgmod


def scenario_dict(**sections) -> dict:
    """Minimal valid raw scenario; keyword sections overlay the defaults."""
    raw = {"schema_version": 1}
    raw.update(sections)
    return raw


def ue_entry(ue_id: int, dl_bps: float = 0.0, ul_bps: float = 0.0,
             jitter: float = 0.0, **extra) -> dict:
    entry = {
        "ue_id": ue_id,
        "traffic": {"kind": "simulated", "dl_target_bps": dl_bps,
                    "ul_target_bps": ul_bps, "jitter_std_fraction": jitter},
    }
    entry.update(extra)
    return entry


def build(**sections) -> cfgmod.ScenarioConfig:
    return cfgmod.from_dict(scenario_dict(**sections))
