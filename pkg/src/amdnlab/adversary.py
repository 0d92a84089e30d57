"""Constrained RL lead vehicle: inverse-headway reward, one-step actor-critic.

The adversary observes (its own velocity, closing speed, follower headway),
emits a Gaussian action over normalized acceleration, and trains online while
it drives. Constraints keep every induced collision preventable: velocity in
[12, 30] m/s and acceleration in [-6, 2] m/s^2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import datasets, gaussian, nnet
from .simulator import Observation, SimConfig, WorldState, init_episode, observe, step
from .trainer import TrainingDivergedError
from .util import make_rng

REWARD_CAP = 100.0
ADV_EPISODE_LEN = 1500      # 60 s; adversarial episodes are shorter than naturalistic
ACTOR_LR = 3e-4
CRITIC_LR = 1e-3
ENTROPY_WEIGHT = 1e-3

# one adversary per sub-range plus two on the full range
POOL_V_RANGES = ((12.0, 20.0), (17.0, 25.0), (22.0, 30.0), (12.0, 30.0), (12.0, 30.0))


class CollectionBudgetError(RuntimeError):
    """Collision collection ran out of episode budget; message carries the rate."""


@dataclass(frozen=True)
class AdvConstraints:
    v_min: float = 12.0
    v_max: float = 30.0
    a_min: float = -6.0
    a_max: float = 2.0

    def __post_init__(self):
        if not (self.v_min < self.v_max and self.a_min < 0.0 < self.a_max):
            raise ValueError(f"inconsistent adversary constraints {self}")


@dataclass
class AdvPolicy:
    actor: nnet.NetworkParams
    critic: nnet.NetworkParams
    actor_state: nnet.AdamState
    critic_state: nnet.AdamState
    gamma: float = 0.99


@dataclass(frozen=True)
class AdvEpisodeResult:
    collided: bool
    min_headway: float
    steps: int
    episode_return: float


def actor_spec() -> nnet.NetworkSpec:
    return nnet.NetworkSpec(input_dim=3, hidden_layers=2, hidden_width=24, head_outputs=2)


def critic_spec() -> nnet.NetworkSpec:
    return nnet.NetworkSpec(input_dim=3, hidden_layers=2, hidden_width=24, head_outputs=1)


def init_adv_policy(seed: int) -> AdvPolicy:
    a_spec, c_spec = actor_spec(), critic_spec()
    return AdvPolicy(
        actor=nnet.init_network(a_spec, seed),
        critic=nnet.init_network(c_spec, seed + 1),
        actor_state=nnet.init_adam(a_spec),
        critic_state=nnet.init_adam(c_spec),
    )


def adv_reward(t_h: float) -> float:
    """Inverse headway, capped so the reward stays finite as the gap closes."""
    if t_h <= 0.0:
        return REWARD_CAP
    return min(1.0 / t_h, REWARD_CAP)


def adversary_observation(world: WorldState, cfg: SimConfig) -> Observation:
    """The lead vehicle's view: own speed, closing speed, follower headway."""
    host = observe(world, cfg)
    return Observation(world.v_lead, world.v_host - world.v_lead, host.t_h)


def _actor_heads(policy: AdvPolicy, x: np.ndarray):
    trace = nnet.forward(policy.actor, x)
    raw = trace.head_raw
    mu = float(np.tanh(raw[0]))
    var = float(max(nnet.nnelu(raw[1]), gaussian.VAR_FLOOR))
    return trace, raw, mu, var


def _to_accel(u: float, v_lead: float, constraints: AdvConstraints, dt: float) -> float:
    """Affine map from [-1, 1] to [a_min, a_max], then clamp to respect the
    velocity bounds after one dt."""
    u = min(max(u, -1.0), 1.0)
    accel = constraints.a_min + (u + 1.0) * 0.5 * (constraints.a_max - constraints.a_min)
    lo = (constraints.v_min - v_lead) / dt
    hi = (constraints.v_max - v_lead) / dt
    return float(min(max(accel, lo), hi))


def adv_act(policy: AdvPolicy, obs: Observation, constraints: AdvConstraints,
            rng: np.random.Generator, explore: bool, dt: float = 0.04) -> float:
    """Lead acceleration for one adversary observation; mean action when not
    exploring."""
    _, _, mu, var = _actor_heads(policy, datasets.normalize(obs))
    u = float(rng.normal(mu, np.sqrt(var))) if explore else mu
    return _to_accel(u, obs.v, constraints, dt)


def adv_train_episode(policy: AdvPolicy, follower, cfg: SimConfig,
                      rng: np.random.Generator,
                      constraints: AdvConstraints = AdvConstraints(),
                      v_range: tuple[float, float] | None = None,
                      episode_len: int = ADV_EPISODE_LEN,
                      recorder: list | None = None) -> tuple[AdvPolicy, AdvEpisodeResult]:
    """One online-learning episode against a frozen follower.

    Every step applies a one-step advantage actor-critic update: the critic
    regresses r + gamma * V(s'), the actor ascends advantage-weighted
    log-likelihood with a small entropy bonus. If ``recorder`` is given, the
    follower's (observation, pedal) pairs are appended to it.
    """
    ep_cfg = replace(cfg, episode_len=episode_len)
    v_range = v_range or (constraints.v_min, constraints.v_max)
    world = init_episode(ep_cfg, rng, v_range)
    follower_obs = observe(world, ep_cfg)
    adv_obs = adversary_observation(world, ep_cfg)

    gamma = policy.gamma
    min_headway = follower_obs.t_h
    total = 0.0
    steps = 0
    collided = False

    while True:
        prev_follower_obs = follower_obs
        pedal = follower(prev_follower_obs)
        x = datasets.normalize(adv_obs)
        actor_trace, raw, mu, var = _actor_heads(policy, x)
        u = float(rng.normal(mu, np.sqrt(var)))
        accel = _to_accel(u, world.v_lead, constraints, ep_cfg.dt)

        world, follower_obs, event = step(world, pedal, accel, ep_cfg)
        if recorder is not None:
            recorder.append((prev_follower_obs, pedal))
        r = adv_reward(follower_obs.t_h)
        steps += 1
        total += r
        min_headway = min(min_headway, follower_obs.t_h)
        collided = collided or event.collided
        adv_obs_next = adversary_observation(world, ep_cfg)

        # critic: regress toward the one-step bootstrapped target
        critic_trace = nnet.forward(policy.critic, x)
        v_s = float(critic_trace.head_raw[0])
        v_next = 0.0 if event.episode_done else float(
            nnet.forward(policy.critic, datasets.normalize(adv_obs_next)).head_raw[0])
        delta = r + gamma * v_next - v_s
        if not np.isfinite(delta):
            raise TrainingDivergedError(f"adversary TD error {delta} at step {steps}")
        critic_grads = nnet.backward(policy.critic, critic_trace, np.array([-2.0 * delta]))
        critic, critic_state = nnet.adam_step(policy.critic, critic_grads,
                                              policy.critic_state, CRITIC_LR)

        # actor: advantage-weighted log-likelihood plus entropy regularization
        d_mu, d_var = gaussian.nll_grad_arrays(mu, var, u)
        g_mu = delta * float(d_mu)
        g_var = delta * float(d_var) - ENTROPY_WEIGHT / (2.0 * var)
        s_mu, s_var = gaussian.squash_grads(raw[0], raw[1])
        actor_grads = nnet.backward(policy.actor, actor_trace,
                                    np.array([g_mu * float(s_mu), g_var * float(s_var)]))
        actor, actor_state = nnet.adam_step(policy.actor, actor_grads,
                                            policy.actor_state, ACTOR_LR)
        policy = AdvPolicy(actor, critic, actor_state, critic_state, gamma)

        adv_obs = adv_obs_next
        if event.episode_done:
            return policy, AdvEpisodeResult(collided, float(min_headway), steps, float(total))


def make_policy_pool(seed: int) -> list[tuple[AdvPolicy, tuple[float, float]]]:
    """Five dataset-collection adversaries: one per velocity sub-range plus two
    on the full constrained range."""
    return [(init_adv_policy(int(make_rng(seed, 20, k).integers(0, 2 ** 31))), v_range)
            for k, v_range in enumerate(POOL_V_RANGES)]


def collect_collision_dataset(pool, follower, n_collisions: int, cfg: SimConfig,
                              seed: int, episode_len: int = ADV_EPISODE_LEN,
                              max_episodes: int | None = None,
                              constraints: AdvConstraints = AdvConstraints()) -> datasets.Dataset:
    """Train the pool round-robin against a frozen follower and keep the last 25
    follower (observation, pedal) pairs of every collision episode."""
    if max_episodes is None:
        max_episodes = max(400, 25 * n_collisions)
    window = datasets.WINDOW_LEN
    rows: list = []
    pool = [(policy, v_range) for policy, v_range in pool]
    collisions = 0
    episodes = 0
    while collisions < n_collisions:
        if episodes >= max_episodes:
            raise CollectionBudgetError(
                f"collected {collisions}/{n_collisions} collisions in {episodes} episodes "
                f"(rate {collisions / max(episodes, 1):.4f}); raise the budget or weaken the follower")
        k = episodes % len(pool)
        policy, v_range = pool[k]
        rng = make_rng(seed, 21, episodes)
        recorder: list = []
        policy, result = adv_train_episode(policy, follower, cfg, rng, constraints,
                                           v_range, episode_len, recorder)
        pool[k] = (policy, v_range)
        episodes += 1
        if result.collided and len(recorder) >= window:
            for i, (obs, pedal) in enumerate(recorder[-window:]):
                rows.append((collisions, i, obs, pedal))
            collisions += 1
    return datasets.from_rows(
        rows, "collision", seed,
        meta={"episodes_run": episodes, "episode_len": episode_len,
              "n_collisions": collisions})
