"""Kinematics, headway, and determinism checks for the two-vehicle world."""
import numpy as np
import pytest

from amdnlab import simulator
from amdnlab.simulator import EPISODE_LOG_HEADER, EpisodeLogger, SimConfig, WorldState


CFG = SimConfig()


def test_headway_examples():
    assert simulator.headway(40.0, 20.0, CFG) == pytest.approx(2.0, abs=1e-15)
    assert simulator.headway(50.0, 0.0, CFG) == 10.0      # v_eps then cap
    assert simulator.headway(-1.0, 20.0, CFG) == 0.0      # negative gaps clip


def test_pedal_to_accel():
    assert simulator.pedal_to_accel(0.0, 0.7, CFG) == 0.0
    assert simulator.pedal_to_accel(1.0, 0.4, CFG) == 2.5
    assert simulator.pedal_to_accel(-1.0, 0.475, CFG) == pytest.approx(-9.81 * 0.475, abs=1e-12)
    # out-of-range pedals clip
    assert simulator.pedal_to_accel(1.7, 0.5, CFG) == 2.5
    assert simulator.pedal_to_accel(-2.0, 1.0, CFG) == pytest.approx(-9.81, abs=1e-12)


def test_step_steady_state():
    world = WorldState(25.0, 25.0, 50.0, 0.8)
    new, obs, event = simulator.step(world, 0.0, 0.0, CFG)
    assert new.x_rel == 50.0
    assert (new.v_host, new.v_lead) == (25.0, 25.0)
    assert not event.collided and not event.episode_done


def test_step_hand_kinematics():
    world = WorldState(20.0, 20.0, 40.0, 1.0)
    new, obs, event = simulator.step(world, 1.0, 0.0, CFG)
    assert new.v_host == pytest.approx(20.1, abs=1e-12)
    assert new.x_rel == pytest.approx(40.0 - 0.1 * 0.04, abs=1e-12)
    assert obs.v_rel == pytest.approx(-0.1, abs=1e-12)


def test_step_collision():
    world = WorldState(21.0, 20.0, 0.001, 0.8)
    new, obs, event = simulator.step(world, 0.0, 0.0, CFG)
    assert new.x_rel < 0.0
    assert event.collided and event.episode_done
    assert obs.t_h == 0.0


def test_step_velocity_clamps():
    world = WorldState(39.99, 0.05, 100.0, 0.9)
    for _ in range(50):
        world, _, _ = simulator.step(world, 1.0, -3.0, CFG)
    assert world.v_host == CFG.v_max
    assert world.v_lead == 0.0


def test_episode_done_at_horizon():
    cfg = SimConfig(episode_len=3)
    world = WorldState(20.0, 20.0, 40.0, 0.8)
    done_flags = []
    for _ in range(3):
        world, _, event = simulator.step(world, 0.0, 0.0, cfg)
        done_flags.append(event.episode_done)
    assert done_flags == [False, False, True]


def test_constant_speed_gap_identity():
    world = WorldState(22.0, 24.5, 30.0, 0.6)
    for k in range(1, 501):
        world, _, _ = simulator.step(world, 0.0, 0.0, CFG)
        expected = 30.0 + k * (24.5 - 22.0) * CFG.dt
        assert world.x_rel == pytest.approx(expected, abs=1e-9)
        assert world.v_host == 22.0 and world.v_lead == 24.5


def test_init_episode_contracts():
    rng = np.random.default_rng(0)
    world = simulator.init_episode(CFG, rng, (20.0, 20.0))
    assert world.x_rel == pytest.approx(40.0, abs=1e-12)
    assert simulator.observe(world, CFG).t_h == pytest.approx(2.0, abs=1e-12)

    frictions = [simulator.init_episode(CFG, rng, (12.0, 30.0)).friction for _ in range(10_000)]
    assert min(frictions) >= 0.4 and max(frictions) <= 1.0

    a = simulator.init_episode(CFG, np.random.default_rng(42), (12.0, 30.0))
    b = simulator.init_episode(CFG, np.random.default_rng(42), (12.0, 30.0))
    assert a == b


def test_trajectory_bitwise_reproducible():
    rng = np.random.default_rng(1)
    pedals = rng.uniform(-1, 1, size=200)
    accels = rng.uniform(-3, 2, size=200)

    def run():
        world = simulator.init_episode(CFG, np.random.default_rng(7), (15.0, 35.0))
        states = []
        for p, a in zip(pedals, accels):
            world, _, _ = simulator.step(world, float(p), float(a), CFG)
            states.append((world.v_host, world.v_lead, world.x_rel))
        return states

    assert run() == run()


def test_episode_log_csv(tmp_path):
    logger = EpisodeLogger(CFG)
    world = WorldState(20.0, 22.0, 45.0, 0.5)
    for _ in range(5):
        world, _, event = simulator.step(world, 0.3, 0.0, CFG)
        logger.record(world, 0.3, 0.0, event.collided)
    path = tmp_path / "episode.csv"
    logger.write(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(EPISODE_LOG_HEADER)
    assert len(lines) == 6
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[3]) == 22.0


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(friction_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        SimConfig(episode_len=0)
