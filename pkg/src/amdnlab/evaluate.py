"""Naturalistic and adversarial testing campaigns with tabular reports.

Naturalistic testing drives a frozen follower against 120 scripted lead
profiles for 5-minute episodes. Adversarial testing trains fresh reinforcement
learners online against the frozen follower and reports how often they induce
collisions. Both draw friction per episode.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adversary import (ADV_EPISODE_LEN, AdvConstraints, adv_train_episode,
                        init_adv_policy)
from .drivers import LeadProfile, PROFILE_KINDS, gen_lead_profile, profile_accel
from .simulator import EpisodeLogger, SimConfig, WorldState, observe, step
from .util import fmt_float, make_rng, write_json

METRICS_HEADER = ["variant", "min_x_rel", "mean_x_rel", "max_abs_v_rel", "mean_v_rel",
                  "min_t_h", "mean_t_h", "nat_collisions", "nat_episodes",
                  "adv_collisions_total", "adv_collisions_mean",
                  "adv_episodes_until_first_collision"]


@dataclass(frozen=True)
class NatReport:
    min_x_rel: float
    mean_x_rel: float
    max_abs_v_rel: float
    mean_v_rel: float
    min_t_h: float
    mean_t_h: float
    collisions: int
    episodes: int


@dataclass(frozen=True)
class AdvReport:
    collisions_total: int
    collisions_mean: float
    episodes_until_first_collision: float | None     # mean over adversaries that collided
    per_adversary_first: tuple[int | None, ...]
    min_headway_series: np.ndarray                   # (n_adversaries, episodes)

    @property
    def n_adversaries(self) -> int:
        return self.min_headway_series.shape[0]

    @property
    def episodes(self) -> int:
        return self.min_headway_series.shape[1]


@dataclass
class NatAccumulator:
    """Streaming per-step aggregation for one naturalistic campaign.

    The gap is floored at zero: a collision episode contributes min_x_rel = 0
    and min_t_h = 0.
    """

    min_x_rel: float = np.inf
    max_abs_v_rel: float = 0.0
    min_t_h: float = np.inf
    sum_x_rel: float = 0.0
    sum_v_rel: float = 0.0
    sum_t_h: float = 0.0
    steps: int = 0
    collisions: int = 0
    episodes: int = 0

    def update(self, x_rel: float, v_rel: float, t_h: float) -> None:
        x_rel = max(x_rel, 0.0)
        self.min_x_rel = min(self.min_x_rel, x_rel)
        self.max_abs_v_rel = max(self.max_abs_v_rel, abs(v_rel))
        self.min_t_h = min(self.min_t_h, t_h)
        self.sum_x_rel += x_rel
        self.sum_v_rel += v_rel
        self.sum_t_h += t_h
        self.steps += 1

    def finish_episode(self, collided: bool) -> None:
        self.episodes += 1
        self.collisions += int(collided)

    def report(self) -> NatReport:
        if self.steps == 0:
            raise ValueError("no steps aggregated")
        return NatReport(
            min_x_rel=float(self.min_x_rel),
            mean_x_rel=self.sum_x_rel / self.steps,
            max_abs_v_rel=float(self.max_abs_v_rel),
            mean_v_rel=self.sum_v_rel / self.steps,
            min_t_h=float(self.min_t_h),
            mean_t_h=self.sum_t_h / self.steps,
            collisions=self.collisions,
            episodes=self.episodes,
        )


def make_naturalistic_suite(seed: int, n: int = 120) -> list[LeadProfile]:
    """Fixed scenario set: profile kinds cycled evenly, one RNG stream per slot."""
    return [gen_lead_profile(PROFILE_KINDS[i % len(PROFILE_KINDS)], make_rng(seed, 40, i))
            for i in range(n)]


def run_naturalistic(follower, scenarios: list[LeadProfile], cfg: SimConfig,
                     seed: int, log_dir: str | Path | None = None) -> NatReport:
    """Drive the follower through every scenario; aggregate Table-style metrics."""
    acc = NatAccumulator()
    for i, profile in enumerate(scenarios):
        rng = make_rng(seed, 41, i)
        friction = float(rng.uniform(*cfg.friction_range))
        v0 = profile.initial_velocity()
        world = WorldState(v_host=v0, v_lead=v0, x_rel=2.0 * v0, friction=friction)
        obs = observe(world, cfg)
        logger = EpisodeLogger(cfg) if log_dir is not None else None
        collided = False
        while True:
            pedal = follower(obs)
            lead_a = profile_accel(profile, world.step * cfg.dt, world.v_lead, cfg.dt)
            world, obs, event = step(world, pedal, lead_a, cfg)
            acc.update(world.x_rel, obs.v_rel, obs.t_h)
            if logger is not None:
                logger.record(world, pedal, lead_a, event.collided)
            if event.collided:
                collided = True
            if event.episode_done:
                break
        acc.finish_episode(collided)
        if logger is not None:
            logger.write(Path(log_dir) / f"nat_episode_{i:03d}.csv")
    return acc.report()


def run_adversarial(follower, cfg: SimConfig, seed: int, n_adversaries: int = 5,
                    max_episodes: int = 200,
                    episode_len: int = ADV_EPISODE_LEN,
                    constraints: AdvConstraints = AdvConstraints()) -> AdvReport:
    """Train fresh adversaries online against the frozen follower.

    Each adversary is randomly initialized (never a dataset-collection agent)
    and trains for max_episodes; collisions and per-episode minimum headway are
    recorded per adversary.
    """
    series = np.zeros((n_adversaries, max_episodes))
    firsts: list[int | None] = []
    total = 0
    for a in range(n_adversaries):
        policy = init_adv_policy(int(make_rng(seed, 50, a).integers(0, 2 ** 31)))
        first: int | None = None
        for ep in range(max_episodes):
            rng = make_rng(seed, 51, a, ep)
            policy, result = adv_train_episode(policy, follower, cfg, rng,
                                               constraints, episode_len=episode_len)
            series[a, ep] = result.min_headway
            if result.collided:
                total += 1
                if first is None:
                    first = ep + 1
        firsts.append(first)
    collided_firsts = [f for f in firsts if f is not None]
    return AdvReport(
        collisions_total=total,
        collisions_mean=total / n_adversaries,
        episodes_until_first_collision=(float(np.mean(collided_firsts))
                                        if collided_firsts else None),
        per_adversary_first=tuple(firsts),
        min_headway_series=series,
    )


def emit_report(reports: dict[str, tuple[NatReport, AdvReport | None]],
                out_dir: str | Path, provenance: dict | None = None) -> list[Path]:
    """Write the metrics table and the per-episode minimum-headway series.

    ``reports`` maps a variant label to its naturalistic report and an optional
    adversarial report. Returns the created file paths.
    """
    if not reports:
        raise ValueError("no reports to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        for label, (nat, adv) in reports.items():
            row = [label, fmt_float(nat.min_x_rel), fmt_float(nat.mean_x_rel),
                   fmt_float(nat.max_abs_v_rel), fmt_float(nat.mean_v_rel),
                   fmt_float(nat.min_t_h), fmt_float(nat.mean_t_h),
                   nat.collisions, nat.episodes]
            if adv is None:
                row += ["", "", ""]
            else:
                row += [adv.collisions_total, fmt_float(adv.collisions_mean),
                        "" if adv.episodes_until_first_collision is None
                        else fmt_float(adv.episodes_until_first_collision)]
            writer.writerow(row)
    paths = [metrics_path]

    adv_items = [(label, adv) for label, (_, adv) in reports.items() if adv is not None]
    if adv_items:
        headway_path = out_dir / "headway.csv"
        episodes = max(adv.episodes for _, adv in adv_items)
        header = ["episode"]
        for label, _ in adv_items:
            header += [f"{label}_mean", f"{label}_std"]
        with open(headway_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for ep in range(episodes):
                row = [ep + 1]
                for _, adv in adv_items:
                    if ep < adv.episodes:
                        col = adv.min_headway_series[:, ep]
                        row += [fmt_float(col.mean()), fmt_float(col.std())]
                    else:
                        row += ["", ""]
                writer.writerow(row)
        paths.append(headway_path)

    if provenance is not None:
        write_json(out_dir / "report.meta.json", provenance)
        paths.append(out_dir / "report.meta.json")
    return paths
