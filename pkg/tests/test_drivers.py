"""Expert control law, lead profiles, and the closed-loop stability check."""
import numpy as np
import pytest

from amdnlab import drivers, simulator
from amdnlab.drivers import ExpertGains, LeadProfile, Segment
from amdnlab.simulator import Observation, SimConfig, WorldState

CFG = SimConfig()
GAINS = ExpertGains()


def test_expert_pedal_examples():
    assert drivers.expert_pedal(Observation(20, 0, 2.0), GAINS) == 0.0
    assert drivers.expert_pedal(Observation(20, 0, 3.0), GAINS) == pytest.approx(0.5)
    assert drivers.expert_pedal(Observation(20, -2, 1.0), GAINS) == pytest.approx(-0.8)


def test_expert_pedal_clipped():
    rng = np.random.default_rng(0)
    for _ in range(500):
        obs = Observation(float(rng.uniform(0, 40)), float(rng.uniform(-20, 20)),
                          float(rng.uniform(0, 10)))
        assert -1.0 <= drivers.expert_pedal(obs, GAINS, rng) <= 1.0


def test_cruise_profile():
    rng = np.random.default_rng(1)
    prof = drivers.gen_lead_profile("cruise", rng)
    assert len(prof.segments) == 1
    assert prof.segments[0].accel == 0.0
    for t in (0.0, 5.0, 500.0):
        assert drivers.profile_accel(prof, t, prof.initial_velocity(), CFG.dt) == 0.0


def test_emergency_profile_has_one_hard_brake():
    for seed in range(30):
        prof = drivers.gen_lead_profile("emergency", np.random.default_rng(seed))
        hard = [s for s in prof.segments if s.accel <= -4.0]
        assert len(hard) == 1
        assert hard[0].accel >= -6.0
        recovery = prof.segments[-1]
        assert 0.0 < recovery.accel <= 2.0


def test_profile_velocities_in_range():
    rng = np.random.default_rng(2)
    for kind in drivers.PROFILE_KINDS:
        for _ in range(20):
            prof = drivers.gen_lead_profile(kind, rng)
            for seg in prof.segments:
                assert 15.0 <= seg.target_v <= 35.0
                assert abs(seg.accel) <= 6.0


def test_profile_generation_deterministic():
    a = drivers.gen_lead_profile("wave", np.random.default_rng(33))
    b = drivers.gen_lead_profile("wave", np.random.default_rng(33))
    assert a == b


def test_profile_accel_piecewise():
    prof = LeadProfile("wave", (Segment(15.0, -4.0, 10.0),))
    # decelerate toward 15 from 20, then hold at 0
    assert drivers.profile_accel(prof, 0.0, 20.0, CFG.dt) == -4.0
    assert drivers.profile_accel(prof, 0.5, 16.0, CFG.dt) == -4.0
    assert drivers.profile_accel(prof, 2.0, 15.0, CFG.dt) == 0.0
    # one-step overshoot clamp: only -1.25 m/s^2 needed to land on target
    assert drivers.profile_accel(prof, 1.0, 15.05, CFG.dt) == pytest.approx(-1.25)
    # wrong-side velocity (already below target with a braking segment)
    assert drivers.profile_accel(prof, 1.0, 14.0, CFG.dt) == 0.0


def test_profile_accel_never_overshoots_target():
    prof = LeadProfile("wave", (Segment(30.0, 3.0, 5.0), Segment(18.0, -5.0, 5.0)))
    v = 18.0
    crossed = False
    for k in range(2000):
        a = drivers.profile_accel(prof, k * CFG.dt, v, CFG.dt)
        v = v + a * CFG.dt
        assert v <= 30.0 + 1e-9 and v >= 18.0 - 1e-9
        if v == 30.0:
            crossed = True
    assert crossed


def test_expert_converges_to_target_headway():
    for v_lead in (15.0, 25.0, 35.0):
        for t_h0 in (1.5, 2.5, 3.0):
            profile = LeadProfile("cruise", (Segment(v_lead, 0.0, 60.0),))
            world = WorldState(v_host=v_lead, v_lead=v_lead, x_rel=t_h0 * v_lead,
                               friction=0.7)
            obs = simulator.observe(world, CFG)
            for _ in range(750):  # 30 simulated seconds
                pedal = drivers.expert_pedal(obs, GAINS)
                world, obs, _ = simulator.step(world, pedal, 0.0, CFG)
            assert abs(obs.t_h - 2.0) < 0.1, (v_lead, t_h0, obs.t_h)


def test_expert_dataset_statistics():
    ds = drivers.generate_expert_dataset(CFG, GAINS, 4500, seed=2024)
    assert len(ds) == 4500
    assert 1.9 <= ds.t_h.mean() <= 2.1
    assert -0.05 <= ds.action.mean() <= 0.05
    again = drivers.generate_expert_dataset(CFG, GAINS, 4500, seed=2024)
    assert np.array_equal(ds.action, again.action)


def test_profile_json_roundtrip():
    rng = np.random.default_rng(8)
    profiles = [drivers.gen_lead_profile(k, rng) for k in drivers.PROFILE_KINDS]
    back = drivers.profiles_from_json(drivers.profiles_to_json(profiles))
    assert back == profiles
