"""Calibration: full desk pipeline, then attack/eval probes on every variant."""
import sys
import time

import numpy as np

from amdnlab import adversary, drivers, trainer
from amdnlab.adversary import collect_collision_dataset, make_policy_pool
from amdnlab.drivers import ExpertGains
from amdnlab.simulator import SimConfig, WorldState, observe, step
from amdnlab.trainer import Hyperparams, make_follower, train
from amdnlab.util import make_rng

SEED = int(sys.argv[1]) if len(sys.argv) > 1 else 0
STEPS = int(sys.argv[2]) if len(sys.argv) > 2 else 100_000

cfg = SimConfig()
gains = ExpertGains()
t0 = time.time()


def clampa(a, vl):
    a = min(max(a, (12.0 - vl) / cfg.dt), (30.0 - vl) / cfg.dt)
    return min(max(a, -6.0), 2.0)


def brake_attack(follower, mu, v0, steps=2000):
    world = WorldState(v0, v0, 2 * v0, mu)
    obs = observe(world, cfg)
    min_th = obs.t_h
    for _ in range(steps):
        a = clampa(-6.0, world.v_lead)
        world, obs, ev = step(world, follower(obs), a, cfg)
        min_th = min(min_th, obs.t_h)
        if ev.collided:
            return True, 0.0
    return False, min_th


def nat_emergency(follower, mu, v0, v_low, decel, steps=3000):
    """Naturalistic-style emergency: decel to v_low, hold, recover at +1.5."""
    world = WorldState(v0, v0, 2 * v0, mu)
    obs = observe(world, cfg)
    min_th = obs.t_h
    phase = "cruise"
    k0 = 0
    for k in range(steps):
        if phase == "cruise" and k > 125:
            phase = "down"
        if phase == "down" and world.v_lead <= v_low + 1e-9:
            phase, k0 = "hold", k
        if phase == "hold" and k - k0 > 250:
            phase = "up"
        a = {"cruise": 0.0, "down": decel, "hold": 0.0, "up": 1.5}[phase]
        if phase == "down":
            a = max(a, (v_low - world.v_lead) / cfg.dt)
        if phase == "up":
            a = min(a, (v0 - world.v_lead) / cfg.dt)
        world, obs, ev = step(world, follower(obs), a, cfg)
        min_th = min(min_th, obs.t_h)
        if ev.collided:
            return True, 0.0
    return False, min_th


print(f"--- pipeline seed={SEED} steps={STEPS}")
expert_ds = drivers.generate_expert_dataset(cfg, gains, 15000, seed=SEED)
print(f"[{time.time()-t0:6.0f}s] expert ds mean_th={expert_ds.t_h.mean():.3f}")

hyper = Hyperparams(batch_size=100, training_steps=STEPS, seed=SEED)
ffn = train("ffn", expert_ds, None, hyper)
print(f"[{time.time()-t0:6.0f}s] ffn val={ffn.best_val:.2e}")
ffn_follower = make_follower(ffn.params, "ffn")

pool = make_policy_pool(SEED)
col_ds = collect_collision_dataset(pool, ffn_follower, 440, cfg, SEED)
print(f"[{time.time()-t0:6.0f}s] collisions collected: {len(col_ds)//25} "
      f"in {col_ds.meta['episodes_run']} episodes; end-window t_h "
      f"max={col_ds.t_h[24::25].max():.4f}")

mdn = train("mdn", expert_ds, None, hyper)
print(f"[{time.time()-t0:6.0f}s] mdn val={mdn.best_val:.4f}")
nokl = train("amdn_nokl", expert_ds, col_ds, hyper)
print(f"[{time.time()-t0:6.0f}s] nokl val={nokl.best_val:.4f}")
amdn = train("amdn", expert_ds, col_ds, hyper)
print(f"[{time.time()-t0:6.0f}s] amdn val={amdn.best_val:.4f}")

followers = {
    "ffn": ffn_follower,
    "mdn": make_follower(mdn.params, "mdn"),
    "nokl": make_follower(nokl.params, "amdn_nokl"),
    "amdn": make_follower(amdn.params, "amdn"),
}

print("--- brake attack (adversary-style, floor 12)")
for name, f in followers.items():
    outs = []
    for mu, v0 in [(0.40, 30), (0.40, 27), (0.45, 30), (0.50, 30), (0.60, 30)]:
        c, m = brake_attack(f, mu, v0)
        outs.append(f"mu{mu:.2f}/v{v0}:{'KILL' if c else format(m, '.2f')}")
    print(f"  {name:5s} " + " ".join(outs))

print("--- naturalistic emergency (floor >= 15)")
for name, f in followers.items():
    outs = []
    for mu, v0, vlo, dec in [(0.40, 35, 15, -6.0), (0.40, 30, 15, -5.0),
                             (0.45, 35, 16, -6.0), (0.50, 35, 15, -4.0)]:
        c, m = nat_emergency(f, mu, v0, vlo, dec)
        outs.append(f"mu{mu:.2f}/v{v0}/d{dec}:{'KILL' if c else format(m, '.2f')}")
    print(f"  {name:5s} " + " ".join(outs))

print("--- adversarial eval probe: 2 adversaries x 120 episodes on ffn & amdn")
from amdnlab.evaluate import run_adversarial
for name in ("ffn", "amdn"):
    rep = run_adversarial(followers[name], cfg, seed=SEED + 1000,
                          n_adversaries=2, max_episodes=120)
    tail = rep.min_headway_series[:, -30:].mean()
    print(f"  {name:5s} collisions={rep.collisions_total} "
          f"first={rep.per_adversary_first} tail_min_th={tail:.3f} "
          f"[{time.time()-t0:6.0f}s]")

print(f"done in {time.time()-t0:.0f}s")
