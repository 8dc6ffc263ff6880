"""Large-scale pathloss models from 3GPP TR 38.901, Table 7.4.1-1.

Implemented scenarios: UMa, UMi-Street-Canyon and InH-Office, each with a
LOS and an NLOS variant.  The NLOS value is floored at the LOS value at the
same geometry, as the table prescribes.  Frequencies enter the formulas in
GHz, distances in metres; results are dB.

The caller hands over the 3D link distance.  The horizontal distance needed
for the LOS breakpoint test is recovered from the default antenna heights
below, which also feed the breakpoint height correction (h_E = 1 m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ChannelScenario

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ScenarioParams:
    bs_height_m: float
    ut_height_m: float
    sigma_sf_los_db: float        # shadow-fading std deviation
    sigma_sf_nlos_db: float
    corr_dist_los_m: float        # shadowing decorrelation distance
    corr_dist_nlos_m: float


# Heights: 38.901 Table 7.2-1 defaults. Shadowing sigmas and correlation
# distances: Tables 7.4.1-1 and 7.5-6.
SCENARIO_PARAMS = {
    ChannelScenario.UMA: ScenarioParams(25.0, 1.5, 4.0, 6.0, 37.0, 50.0),
    ChannelScenario.UMI: ScenarioParams(10.0, 1.5, 4.0, 7.82, 10.0, 13.0),
    ChannelScenario.INH: ScenarioParams(3.0, 1.0, 3.0, 8.03, 10.0, 6.0),
}

_ENV_HEIGHT_M = 1.0   # effective environment height h_E for the breakpoint


def _geometry(params: ScenarioParams, distance_3d_m: float):
    """(d2d, d3d) with d2d recovered from the default height difference."""
    d3d = max(distance_3d_m, 1.0)
    dh = params.bs_height_m - params.ut_height_m
    d2d = math.sqrt(max(d3d * d3d - dh * dh, 1.0))
    return d2d, d3d


def _breakpoint_m(params: ScenarioParams, fc_ghz: float) -> float:
    h_bs = params.bs_height_m - _ENV_HEIGHT_M
    h_ut = params.ut_height_m - _ENV_HEIGHT_M
    return 4.0 * h_bs * h_ut * fc_ghz * 1e9 / SPEED_OF_LIGHT


def _uma_los(params, d2d, d3d, fc):
    dbp = _breakpoint_m(params, fc)
    if d2d <= dbp:
        return 28.0 + 22.0 * math.log10(d3d) + 20.0 * math.log10(fc)
    dh = params.bs_height_m - params.ut_height_m
    return (28.0 + 40.0 * math.log10(d3d) + 20.0 * math.log10(fc)
            - 9.0 * math.log10(dbp * dbp + dh * dh))


def _uma_nlos(params, d2d, d3d, fc):
    pl = (13.54 + 39.08 * math.log10(d3d) + 20.0 * math.log10(fc)
          - 0.6 * (params.ut_height_m - 1.5))
    return max(pl, _uma_los(params, d2d, d3d, fc))


def _umi_los(params, d2d, d3d, fc):
    dbp = _breakpoint_m(params, fc)
    if d2d <= dbp:
        return 32.4 + 21.0 * math.log10(d3d) + 20.0 * math.log10(fc)
    dh = params.bs_height_m - params.ut_height_m
    return (32.4 + 40.0 * math.log10(d3d) + 20.0 * math.log10(fc)
            - 9.5 * math.log10(dbp * dbp + dh * dh))


def _umi_nlos(params, d2d, d3d, fc):
    pl = (35.3 * math.log10(d3d) + 22.4 + 21.3 * math.log10(fc)
          - 0.3 * (params.ut_height_m - 1.5))
    return max(pl, _umi_los(params, d2d, d3d, fc))


def _inh_los(params, d2d, d3d, fc):
    return 32.4 + 17.3 * math.log10(d3d) + 20.0 * math.log10(fc)


def _inh_nlos(params, d2d, d3d, fc):
    pl = 38.3 * math.log10(d3d) + 17.30 + 24.9 * math.log10(fc)
    return max(pl, _inh_los(params, d2d, d3d, fc))


_MODELS = {
    (ChannelScenario.UMA, True): _uma_los,
    (ChannelScenario.UMA, False): _uma_nlos,
    (ChannelScenario.UMI, True): _umi_los,
    (ChannelScenario.UMI, False): _umi_nlos,
    (ChannelScenario.INH, True): _inh_los,
    (ChannelScenario.INH, False): _inh_nlos,
}


def pathloss_db(scenario: ChannelScenario, distance_3d_m: float,
                frequency_hz: float, los: bool) -> float:
    """Large-scale pathloss in dB for one link."""
    try:
        params = SCENARIO_PARAMS[scenario]
        model = _MODELS[(scenario, bool(los))]
    except KeyError:
        raise ValueError(f"unsupported pathloss scenario {scenario!r}") from None
    if frequency_hz <= 0:
        raise ValueError("frequency_hz must be > 0")
    fc_ghz = frequency_hz / 1e9
    d2d, d3d = _geometry(params, distance_3d_m)
    return model(params, d2d, d3d, fc_ghz)


def shadow_sigma_db(scenario: ChannelScenario, los: bool) -> float:
    params = SCENARIO_PARAMS[scenario]
    return params.sigma_sf_los_db if los else params.sigma_sf_nlos_db


def shadow_corr_distance_m(scenario: ChannelScenario, los: bool) -> float:
    params = SCENARIO_PARAMS[scenario]
    return params.corr_dist_los_m if los else params.corr_dist_nlos_m
