"""Scripted expert follower and lead-vehicle trajectory profiles.

The expert is a proportional law on headway error and relative speed, tuned to
give an overdamped closed loop at the simulator's time step. Lead profiles are
segment lists (target velocity, acceleration, hold) that loop for the length of
an episode; they drive both dataset generation and naturalistic testing.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import datasets
from .simulator import Observation, SimConfig, WorldState, observe, step

PROFILE_KINDS = ("cruise", "wave", "emergency")
# demonstration episodes are benign highway driving; emergency maneuvers appear
# only in the evaluation scenarios
GEN_MIX = ("cruise", "cruise", "cruise", "wave")
NAT_V_RANGE = (15.0, 35.0)


@dataclass(frozen=True)
class ExpertGains:
    k_h: float = 0.5            # pedal per second of headway error
    k_v: float = 0.15           # pedal per m/s of relative speed
    target_headway: float = 2.0
    noise_std: float = 0.02     # pedal units, dataset generation only

    def __post_init__(self):
        if self.k_h <= 0 or self.k_v <= 0 or self.target_headway <= 0:
            raise ValueError("gains and target headway must be > 0")


@dataclass(frozen=True)
class Segment:
    target_v: float   # m/s
    accel: float      # m/s^2, signed toward the target
    hold_s: float     # s, dwell after the target is reached

    def __post_init__(self):
        if abs(self.accel) > 6.0:
            raise ValueError(f"segment accel {self.accel} exceeds 6 m/s^2")


@dataclass(frozen=True)
class LeadProfile:
    kind: str
    segments: tuple[Segment, ...]

    def initial_velocity(self) -> float:
        return self.segments[0].target_v

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "segments": [[s.target_v, s.accel, s.hold_s] for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "LeadProfile":
        return cls(d["kind"], tuple(Segment(*map(float, s)) for s in d["segments"]))


def expert_pedal(obs: Observation, gains: ExpertGains,
                 rng: np.random.Generator | None = None) -> float:
    """Proportional pedal on headway error and relative speed, clipped to [-1, 1].

    Gaussian exploration noise is added only when a generator is supplied.
    """
    pedal = gains.k_h * (obs.t_h - gains.target_headway) + gains.k_v * obs.v_rel
    if rng is not None and gains.noise_std > 0.0:
        pedal += rng.normal(0.0, gains.noise_std)
    return float(np.clip(pedal, -1.0, 1.0))


def gen_lead_profile(kind: str, rng: np.random.Generator) -> LeadProfile:
    """Draw one profile: steady cruise, velocity waves, or an emergency brake."""
    lo, hi = NAT_V_RANGE
    if kind == "cruise":
        return LeadProfile(kind, (Segment(float(rng.uniform(lo, hi)), 0.0, 60.0),))
    if kind == "wave":
        v_low = float(rng.uniform(lo, hi - 5.0))
        v_high = float(rng.uniform(v_low + 4.0, hi))
        segments = []
        for _ in range(int(rng.integers(2, 4))):
            up = float(rng.uniform(0.5, 3.0))
            down = float(rng.uniform(0.5, 3.0))
            segments.append(Segment(v_high, up, float(rng.uniform(8.0, 20.0))))
            segments.append(Segment(v_low, -down, float(rng.uniform(8.0, 20.0))))
        return LeadProfile(kind, tuple(segments))
    if kind == "emergency":
        v_start = float(rng.uniform(24.0, hi))
        v_low = float(rng.uniform(lo, 18.0))
        return LeadProfile(kind, (
            Segment(v_start, 0.0, float(rng.uniform(10.0, 30.0))),
            Segment(v_low, float(rng.uniform(-6.0, -4.0)), float(rng.uniform(5.0, 15.0))),
            Segment(v_start, float(rng.uniform(0.5, 2.0)), float(rng.uniform(10.0, 30.0))),
        ))
    raise ValueError(f"unknown profile kind {kind!r}")


def _schedule(profile: LeadProfile) -> list[float]:
    """Per-segment planned duration: ramp time from the previous target plus hold."""
    durations = []
    prev = profile.segments[-1].target_v
    for seg in profile.segments:
        ramp = abs(seg.target_v - prev) / abs(seg.accel) if seg.accel != 0.0 else 0.0
        durations.append(ramp + seg.hold_s)
        prev = seg.target_v
    return durations


def profile_accel(profile: LeadProfile, t: float, v_lead_current: float,
                  dt: float) -> float:
    """Lead acceleration at time t: the active segment's accel while approaching
    its target (clamped to land exactly), zero during the hold. Profiles loop."""
    durations = _schedule(profile)
    total = sum(durations)
    t = t % total if total > 0 else 0.0
    seg = profile.segments[-1]
    for s, d in zip(profile.segments, durations):
        if t < d:
            seg = s
            break
        t -= d

    gap = seg.target_v - v_lead_current
    if seg.accel == 0.0 or gap == 0.0 or np.sign(gap) != np.sign(seg.accel):
        return 0.0
    needed = gap / dt
    return float(needed if abs(needed) < abs(seg.accel) else seg.accel)


def run_expert_episode(cfg: SimConfig, gains: ExpertGains, profile: LeadProfile,
                       world: WorldState, rng: np.random.Generator | None,
                       logger=None) -> tuple[list[tuple[Observation, float]], bool]:
    """Close the loop between the scripted expert and a lead profile.

    Returns the per-step (observation seen, pedal taken) pairs and whether the
    episode ended in a collision.
    """
    records = []
    obs = observe(world, cfg)
    collided = False
    while True:
        pedal = expert_pedal(obs, gains, rng)
        lead_a = profile_accel(profile, world.step * cfg.dt, world.v_lead, cfg.dt)
        world, obs, event = step(world, pedal, lead_a, cfg)
        records.append((obs, pedal))
        if logger is not None:
            logger.record(world, pedal, lead_a, event.collided)
        if event.collided:
            collided = True
        if event.episode_done:
            return records, collided


def generate_expert_dataset(cfg: SimConfig, gains: ExpertGains, n_transitions: int,
                            seed: int, episode_len: int = 1500) -> datasets.Dataset:
    """Demonstration data: the noisy expert follows cycled profile kinds until
    n_transitions rows are collected. Episodes start at the 2 s equilibrium."""
    gen_cfg = replace(cfg, episode_len=episode_len)
    rows: list[tuple[int, int, Observation, float]] = []
    episode = 0
    while len(rows) < n_transitions:
        rng = np.random.default_rng(np.random.SeedSequence((seed, episode)))
        kind = PROFILE_KINDS[episode % len(PROFILE_KINDS)]
        profile = gen_lead_profile(kind, rng)
        v0 = profile.initial_velocity()
        friction = float(rng.uniform(*gen_cfg.friction_range))
        world = WorldState(v_host=v0, v_lead=v0, x_rel=2.0 * v0, friction=friction)
        records, collided = run_expert_episode(gen_cfg, gains, profile, world, rng)
        if collided:
            raise RuntimeError(f"scripted expert collided in data generation episode {episode}")
        rows.extend((episode, i, obs, act) for i, (obs, act) in enumerate(records))
        episode += 1
    return datasets.from_rows(rows[:n_transitions], "expert", seed,
                              meta={"episodes": episode, "episode_len": episode_len})


def profiles_to_json(profiles: list[LeadProfile]) -> list[dict]:
    return [p.to_dict() for p in profiles]


def profiles_from_json(items: list[dict]) -> list[LeadProfile]:
    return [LeadProfile.from_dict(d) for d in items]
