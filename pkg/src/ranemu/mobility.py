"""UE movement models.

All models advance in whole ticks and keep the height fixed; the horizontal
step length is exactly ``speed * dt`` (waypoint stops short at its target).
World bounds are reflective: a step crossing an edge is folded back inside,
preserving the distance traveled that tick.
"""

from __future__ import annotations

import math

import numpy as np

from .config import MobilityConfig, MobilityModel

Bounds = tuple[tuple[float, float], tuple[float, float]]


def _reflect(value: float, lo: float, hi: float) -> tuple[float, bool]:
    flipped = False
    # fold until inside; a single step never spans the world twice in practice
    while value < lo or value > hi:
        if value < lo:
            value = 2.0 * lo - value
        else:
            value = 2.0 * hi - value
        flipped = not flipped
    return value, flipped


class MobilityBase:
    def __init__(self, cfg: MobilityConfig, position: tuple[float, float, float],
                 bounds: Bounds, rng: np.random.Generator):
        self.cfg = cfg
        self.x, self.y, self.z = position
        self.bounds = bounds
        self.rng = rng

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def step(self, dt_ms: float) -> tuple[float, float, float]:
        raise NotImplementedError

    def _apply(self, dx: float, dy: float) -> tuple[bool, bool]:
        (xlo, ylo), (xhi, yhi) = self.bounds
        self.x, fx = _reflect(self.x + dx, xlo, xhi)
        self.y, fy = _reflect(self.y + dy, ylo, yhi)
        return fx, fy


class StaticMobility(MobilityBase):
    def step(self, dt_ms: float) -> tuple[float, float, float]:
        return self.position


class RandomWalkMobility(MobilityBase):
    """Constant speed, heading perturbed by Gaussian noise each tick."""

    def __init__(self, cfg, position, bounds, rng):
        super().__init__(cfg, position, bounds, rng)
        self.heading_rad = math.radians(cfg.initial_heading_deg)

    def step(self, dt_ms: float) -> tuple[float, float, float]:
        if self.cfg.heading_sigma_deg > 0.0:
            self.heading_rad += math.radians(
                self.rng.normal(0.0, self.cfg.heading_sigma_deg))
        dist = self.cfg.speed_mps * dt_ms / 1000.0
        dx = dist * math.cos(self.heading_rad)
        dy = dist * math.sin(self.heading_rad)
        fx, fy = self._apply(dx, dy)
        if fx:
            self.heading_rad = math.pi - self.heading_rad
        if fy:
            self.heading_rad = -self.heading_rad
        return self.position


class WaypointMobility(MobilityBase):
    """Drives toward each waypoint in turn and cycles the list forever."""

    def __init__(self, cfg, position, bounds, rng):
        super().__init__(cfg, position, bounds, rng)
        self._idx = 0

    @property
    def target(self) -> tuple[float, float, float]:
        return self.cfg.waypoints[self._idx]

    def step(self, dt_ms: float) -> tuple[float, float, float]:
        budget = self.cfg.speed_mps * dt_ms / 1000.0
        # a fast UE may pass several close waypoints within one tick
        while budget > 0.0:
            tx, ty, _tz = self.target
            dx, dy = tx - self.x, ty - self.y
            dist = math.hypot(dx, dy)
            if dist <= self.cfg.arrival_tolerance_m:
                self._idx = (self._idx + 1) % len(self.cfg.waypoints)
                if len(self.cfg.waypoints) == 1:
                    break
                continue
            move = min(budget, dist)
            self.x += dx / dist * move
            self.y += dy / dist * move
            budget -= move
        return self.position


class ManhattanMobility(MobilityBase):
    """Axis-aligned movement on a street grid.

    Every tick is one full-length move along the current axis, so per-tick
    displacement stays exact; a turn decided when the UE crosses a street
    line takes effect at the next tick boundary.  The cross-street offset
    therefore drifts off the grid lines over time, which is acceptable for
    the channel statistics this feeds.
    """

    _DIRS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))

    def __init__(self, cfg, position, bounds, rng):
        super().__init__(cfg, position, bounds, rng)
        # snap the initial heading to the nearest axis
        quadrant = int(round(cfg.initial_heading_deg / 90.0)) % 4
        self._dir = quadrant
        self._pending_turn = 0

    def step(self, dt_ms: float) -> tuple[float, float, float]:
        if self._pending_turn:
            self._dir = (self._dir + self._pending_turn) % 4
            self._pending_turn = 0
        dist = self.cfg.speed_mps * dt_ms / 1000.0
        ux, uy = self._DIRS[self._dir]
        before = self.x if ux else self.y
        fx, fy = self._apply(ux * dist, uy * dist)
        if (fx and ux) or (fy and uy):
            self._dir = (self._dir + 2) % 4
            return self.position
        after = self.x if ux else self.y
        g = self.cfg.grid_step_m
        if math.floor(before / g) != math.floor(after / g):
            u = self.rng.uniform()
            if u < self.cfg.turn_probability:
                self._pending_turn = 1
            elif u < 2.0 * self.cfg.turn_probability:
                self._pending_turn = -1
        return self.position


_MODELS = {
    MobilityModel.STATIC: StaticMobility,
    MobilityModel.RANDOM_WALK: RandomWalkMobility,
    MobilityModel.WAYPOINT: WaypointMobility,
    MobilityModel.MANHATTAN: ManhattanMobility,
}


def make_mobility(cfg: MobilityConfig, position: tuple[float, float, float],
                  bounds: Bounds, rng: np.random.Generator) -> MobilityBase:
    return _MODELS[cfg.model](cfg, position, bounds, rng)
