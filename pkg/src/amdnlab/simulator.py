"""Deterministic fixed-step longitudinal two-vehicle world.

Point-mass dynamics at dt = 0.04 s: the host pedal maps to acceleration
(gas fixed, braking limited by friction), both velocities integrate first and
the gap integrates from the new velocities. A collision is a gap <= 0.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .util import fmt_float

log = logging.getLogger(__name__)

GRAVITY = 9.81


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.04                      # 25 Hz
    v_max: float = 40.0                   # m/s
    gas_accel_max: float = 2.5            # m/s^2
    brake_decel_max_factor: float = GRAVITY   # m/s^2 per unit friction
    friction_range: tuple[float, float] = (0.4, 1.0)
    episode_len: int = 7500               # steps; 5 minutes at 25 Hz
    headway_cap: float = 10.0             # s
    v_eps: float = 0.1                    # m/s; headway division guard

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        lo, hi = self.friction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"friction range {self.friction_range} outside (0, 1]")
        if self.episode_len < 1:
            raise ValueError("episode_len must be >= 1")


@dataclass(frozen=True)
class WorldState:
    v_host: float     # m/s
    v_lead: float     # m/s
    x_rel: float      # m, bumper-to-bumper gap
    friction: float
    step: int = 0


@dataclass(frozen=True)
class Observation:
    v: float       # host velocity, m/s
    v_rel: float   # v_lead - v_host, m/s
    t_h: float     # time headway, s, capped


@dataclass(frozen=True)
class StepEvent:
    collided: bool
    episode_done: bool


def headway(x_rel: float, v: float, cfg: SimConfig) -> float:
    """Gap in seconds: x_rel / v guarded by v_eps, clipped to [0, headway_cap]."""
    return float(np.clip(x_rel / max(v, cfg.v_eps), 0.0, cfg.headway_cap))


def observe(world: WorldState, cfg: SimConfig) -> Observation:
    return Observation(world.v_host, world.v_lead - world.v_host,
                       headway(world.x_rel, world.v_host, cfg))


def pedal_to_accel(pedal: float, friction: float, cfg: SimConfig) -> float:
    """Pedal in [-1, 1] to host acceleration; braking authority scales with friction."""
    if pedal > 1.0 or pedal < -1.0:
        log.warning("pedal %.4f outside [-1, 1]; clipping", pedal)
        pedal = min(max(pedal, -1.0), 1.0)
    if pedal >= 0.0:
        return pedal * cfg.gas_accel_max
    return pedal * cfg.brake_decel_max_factor * friction


def step(world: WorldState, pedal: float, lead_accel: float,
         cfg: SimConfig) -> tuple[WorldState, Observation, StepEvent]:
    """Advance one tick with semi-implicit Euler; velocities update before the gap."""
    a_host = pedal_to_accel(pedal, world.friction, cfg)
    v_host = min(max(world.v_host + a_host * cfg.dt, 0.0), cfg.v_max)
    v_lead = min(max(world.v_lead + lead_accel * cfg.dt, 0.0), cfg.v_max)
    x_rel = world.x_rel + (v_lead - v_host) * cfg.dt
    n_step = world.step + 1

    new = WorldState(v_host, v_lead, x_rel, world.friction, n_step)
    collided = x_rel <= 0.0
    done = collided or n_step >= cfg.episode_len
    return new, observe(new, cfg), StepEvent(collided, done)


def init_episode(cfg: SimConfig, rng: np.random.Generator,
                 v_range: tuple[float, float]) -> WorldState:
    """Both vehicles at one speed drawn from v_range, gap set for a 2 s headway,
    friction drawn uniformly from the configured range."""
    v = float(rng.uniform(*v_range))
    friction = float(rng.uniform(*cfg.friction_range))
    return WorldState(v_host=v, v_lead=v, x_rel=2.0 * v, friction=friction, step=0)


EPISODE_LOG_HEADER = ["step", "time_s", "v_host", "v_lead", "v_rel", "x_rel",
                      "t_h", "pedal", "lead_accel", "friction", "collided"]


@dataclass
class EpisodeLogger:
    """Accumulates one CSV row per simulator step for external plotting."""

    cfg: SimConfig
    rows: list[list] = field(default_factory=list)

    def record(self, world: WorldState, pedal: float, lead_accel: float, collided: bool) -> None:
        obs = observe(world, self.cfg)
        self.rows.append([world.step, world.step * self.cfg.dt, world.v_host, world.v_lead,
                          obs.v_rel, world.x_rel, obs.t_h, pedal, lead_accel,
                          world.friction, int(collided)])

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(EPISODE_LOG_HEADER)
            for row in self.rows:
                writer.writerow([row[0]] + [fmt_float(v) for v in row[1:10]] + [row[10]])
