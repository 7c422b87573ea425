import json
import math
from pathlib import Path

import numpy as np
import pytest

from flowrl.envs import EnvStep, MultiLaneEnv, PendulumEnv, PointMassEnv, make
from flowrl.envs.base import huber_like, wrap_angle
from flowrl.envs.multilane import (
    ACCEL_HIGH,
    CAR_WIDTH,
    DT,
    LANE_WIDTH,
    NUM_SLOTS,
    NUM_WAYPOINTS,
    ROAD_WIDTH,
    TERMINAL_PENALTY,
    TrafficCar,
    boundary_cost,
    comfort_reward,
    control_cost,
    front_cost,
    lane_center,
    liveness_reward,
    space_cost,
    tracking_reward,
)
from flowrl.envs.trace import read_trace, trace_record, write_rollout_trace

GOLDEN = Path(__file__).parent / "golden" / "multilane_seed7.jsonl"


# ----------------------------------------------------------------- shared

@pytest.mark.parametrize("env_id", ["pendulum", "pointmass", "multilane"])
def test_reset_deterministic(env_id):
    env = make(env_id)
    a = env.reset(seed=123)
    b = env.reset(seed=123)
    assert np.array_equal(a, b)
    c = env.reset(seed=124)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("env_id", ["pendulum", "pointmass", "multilane"])
def test_reward_decomposition(env_id):
    env = make(env_id)
    env.reset(seed=5)
    rng = np.random.default_rng(5)
    for _ in range(50):
        action = rng.uniform(env.action_low, env.action_high)
        result = env.step(action)
        total = sum(result.info["components"].values())
        assert abs(result.reward - total) <= 1e-9
        if result.done:
            env.reset(seed=6)


@pytest.mark.parametrize("env_id", ["pendulum", "pointmass", "multilane"])
def test_trajectory_determinism(env_id):
    def run():
        env = make(env_id)
        env.reset(seed=42)
        rng = np.random.default_rng(0)
        out = []
        for _ in range(30):
            r = env.step(rng.uniform(env.action_low, env.action_high))
            out.append((r.observation.copy(), r.reward, r.done))
            if r.done:
                break
        return out

    a, b = run(), run()
    assert len(a) == len(b)
    for (oa, ra, da), (ob, rb, db) in zip(a, b):
        assert np.array_equal(oa, ob) and ra == rb and da == db


@pytest.mark.parametrize("env_id", ["pendulum", "pointmass", "multilane"])
def test_state_snapshot_roundtrip(env_id):
    env = make(env_id)
    env.reset(seed=9)
    rng = np.random.default_rng(1)
    for _ in range(7):
        env.step(rng.uniform(env.action_low, env.action_high))
    snap = json.loads(json.dumps(env.get_state()))  # must be JSON-able

    env2 = make(env_id)
    env2.reset(seed=9)
    env2.set_state(snap)
    action = rng.uniform(env.action_low, env.action_high)
    r1 = env.step(action)
    r2 = env2.step(action)
    assert np.array_equal(r1.observation, r2.observation)
    assert r1.reward == r2.reward


# --------------------------------------------------------------- pendulum

def test_pendulum_energy_conservation():
    env = PendulumEnv()
    env.reset(seed=0)
    env.set_state({"theta": 2.0, "theta_dot": 1.0, "steps": 0})
    e0 = env.energy()
    scale = e0 + 5.0  # datum shift: rest at the bottom has shifted energy 0
    drift = 0.0
    for _ in range(100):
        env.step([0.0])
        drift = max(drift, abs(env.energy() - e0))
    assert drift / scale < 1e-3


def test_pendulum_reward_components():
    env = PendulumEnv()
    env.reset(seed=0)
    env.set_state({"theta": 0.0, "theta_dot": 0.0, "steps": 0})
    r = env.step([0.0])
    # Upright at rest with zero torque stays near zero cost.
    assert r.reward == pytest.approx(0.0, abs=1e-6)
    assert set(r.info["components"]) == {"angle", "velocity", "control"}
    assert all(v <= 0.0 for v in r.info["components"].values())


def test_pendulum_time_limit_truncates():
    env = PendulumEnv()
    env.reset(seed=3)
    for i in range(200):
        r = env.step([0.5])
    assert r.done and r.info["truncated"]


def test_pendulum_action_clamped():
    env = PendulumEnv()
    env.reset(seed=1)
    env.set_state({"theta": 3.0, "theta_dot": 0.0, "steps": 0})
    r_big = env.step([100.0])
    env.set_state({"theta": 3.0, "theta_dot": 0.0, "steps": 0})
    r_max = env.step([2.0])
    assert np.array_equal(r_big.observation, r_max.observation)


# -------------------------------------------------------------- pointmass

def test_pointmass_arrival():
    env = PointMassEnv()
    env.reset(seed=2)
    env.set_state({"p": [0.0, 0.0], "v": [0.0, 0.0], "goal": [0.1, 0.0], "steps": 0})
    r = env.step([0.0, 0.0])
    assert r.info["arrived"] and r.done


def test_pointmass_reward_is_negative_distance():
    env = PointMassEnv()
    env.reset(seed=2)
    env.set_state({"p": [0.0, 0.0], "v": [0.0, 0.0], "goal": [2.0, 0.0], "steps": 0})
    r = env.step([0.0, 0.0])
    assert r.reward == pytest.approx(-2.0)


# --------------------------------------------------------- multilane: obs

def test_multilane_observation_length():
    # 5 ego values + 4 per waypoint + 6 per surrounding slot.
    env = MultiLaneEnv()
    obs = env.reset(seed=0)
    assert NUM_WAYPOINTS == 10 and NUM_SLOTS == 8
    assert obs.shape == (5 + 4 * NUM_WAYPOINTS + 6 * NUM_SLOTS,)
    assert obs.shape == (93,)


def test_multilane_mask_contract():
    env = MultiLaneEnv(density="sparse")  # 3 live vehicles
    env.reset(seed=0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = env.step(rng.uniform(env.action_low, env.action_high))
        base = 5 + 4 * NUM_WAYPOINTS
        for k in range(NUM_SLOTS):
            slot = r.observation[base + 6 * k: base + 6 * k + 6]
            mask = slot[5]
            assert mask in (0.0, 1.0)
            if mask == 0.0:
                assert np.all(slot == 0.0)
        if r.done:
            break


def test_multilane_density_counts():
    for density, count in (("sparse", 3), ("normal", 6), ("dense", 8)):
        env = MultiLaneEnv(density=density)
        env.reset(seed=11)
        assert len(env.traffic) == count
    with pytest.raises(ValueError):
        MultiLaneEnv(density="jammed")


# ------------------------------------------------------ multilane: reward

def zero_cost_state(env, target_speed=3.5):
    """Ego exactly on the reference at the target speed, zero actuators."""
    env.reset(seed=0)
    env.traffic = []
    env.ref_lane = 1
    env.target_speed = target_speed
    env.set_state({
        "ego": [10.0, lane_center(1), 0.0, target_speed, 0.0, 0.0],
        "traffic": [], "ref_lane": 1, "target_speed": target_speed,
        "goal_x": 120.0, "steps": 0, "prev_a_x": 0.0, "prev_delta": 0.0,
    })


def test_multilane_on_reference_zero_costs():
    env = MultiLaneEnv()
    zero_cost_state(env)
    r = env.step([0.0, 0.0])
    comp = r.info["components"]
    assert comp["tracking_lat"] == 0.0
    assert comp["tracking_speed"] == 0.0
    assert comp["tracking_heading"] == 0.0
    assert comp["control_accel"] == 0.0
    assert comp["control_steer"] == 0.0
    assert comp["comfort_yaw"] == 0.0
    assert comp["comfort_jerk"] == 0.0
    assert comp["comfort_steer_rate"] == 0.0
    assert comp["cost_front"] == 0.0
    assert comp["cost_space"] == 0.0
    assert comp["cost_boundary"] == 0.0
    # only liveness remains
    assert r.reward == pytest.approx(1.0)


def test_multilane_component_signs():
    env = MultiLaneEnv()
    env.reset(seed=21)
    rng = np.random.default_rng(21)
    for _ in range(60):
        r = env.step(rng.uniform(env.action_low, env.action_high))
        for name, value in r.info["components"].items():
            if name == "liveness":
                assert 0.0 <= value <= 1.0
            else:
                assert value <= 0.0
        if r.done:
            env.reset(seed=22)


def test_multilane_accel_clamped_by_table_bound():
    env = MultiLaneEnv()
    zero_cost_state(env)
    for _ in range(10):
        r = env.step([10.0, 0.0])  # clamped to +0.25 per step
        assert env.ego.a_x <= ACCEL_HIGH
    assert env.ego.a_x == pytest.approx(ACCEL_HIGH)


def test_tracking_reward_values():
    assert tracking_reward(0.0, 0.0, 0.0) == 0.0
    assert tracking_reward(0.5, 0.0, 0.0) == pytest.approx(-1.5 * 0.25)
    assert tracking_reward(0.0, 2.0, 0.0) == pytest.approx(-3.0 * 3.0)  # linear tail
    assert tracking_reward(0.0, 0.0, 0.5) == pytest.approx(-0.3 * 0.25)


def test_control_cost_values():
    assert control_cost(0.0, 0.0, 0.0) == 0.0
    assert control_cost(0.8, 0.0, 0.0) == pytest.approx(-0.512)
    assert control_cost(0.0, 0.3, 0.0) == pytest.approx(-0.1 * 0.3)


def test_comfort_reward_values():
    assert comfort_reward(0.0, 0.0, 0.0) == 0.0
    assert comfort_reward(0.0, 1.0, 0.0) == pytest.approx(-0.5)
    assert comfort_reward(1.0, 0.0, 0.0) == pytest.approx(-0.7)
    assert comfort_reward(0.0, 0.0, 1.0) == pytest.approx(-0.005)


def test_liveness_values():
    assert liveness_reward(3.0) == pytest.approx(1.0)
    assert liveness_reward(0.0) == 0.0
    assert liveness_reward(9.0) == pytest.approx(1.0)  # clipped at 3
    assert liveness_reward(1.5) == pytest.approx(0.5)


def test_front_cost_value():
    v = 3.0
    assert front_cost(v * 1.0, v) == pytest.approx(10.0 * (1.0 - math.tanh(1.0)))
    assert front_cost(v * 1.0, v) == pytest.approx(2.384, abs=5e-4)
    assert front_cost(100.0, 0.2) == 0.0  # crawling ego is safe


def test_boundary_cost_shape():
    assert boundary_cost(0.975) == 0.0          # lane-centered outer lane
    assert boundary_cost(0.5) == 0.0            # exactly at threshold
    assert boundary_cost(0.3) == pytest.approx(20.0 * 0.7)
    assert boundary_cost(0.0) == pytest.approx(20.0)


def test_space_cost_shape():
    assert space_cost(10.0, 3.75) == 0.0
    assert space_cost(0.0, 3.75) == pytest.approx(2.0 * (1.0 - 3.75 / 8.0))


def test_multilane_collision_penalty():
    env = MultiLaneEnv()
    zero_cost_state(env)
    env.traffic = [TrafficCar(x=11.0, lane=1, speed=0.0, desired_speed=0.0)]
    r = env.step([0.0, 0.0])
    assert r.info["collision"] and r.done
    assert r.info["components"]["terminal"] == -TERMINAL_PENALTY


def test_multilane_off_road_penalty():
    env = MultiLaneEnv()
    zero_cost_state(env)
    env.set_state({
        "ego": [10.0, 0.95, 0.0, 3.0, 0.0, -0.571],
        "traffic": [], "ref_lane": 0, "target_speed": 3.0,
        "goal_x": 120.0, "steps": 0, "prev_a_x": 0.0, "prev_delta": 0.0,
    })
    done = False
    for _ in range(60):
        r = env.step([0.0, -0.025])
        if r.done:
            done = True
            break
    assert done and r.info["off_road"]
    assert r.info["components"]["terminal"] == -TERMINAL_PENALTY


def test_multilane_arrival():
    env = MultiLaneEnv()
    zero_cost_state(env)
    env.set_state({
        "ego": [119.9, lane_center(1), 0.0, 3.0, 0.0, 0.0],
        "traffic": [], "ref_lane": 1, "target_speed": 3.0,
        "goal_x": 120.0, "steps": 0, "prev_a_x": 0.0, "prev_delta": 0.0,
    })
    r = env.step([0.0, 0.0])
    assert r.info["arrived"] and r.done and not r.info["truncated"]


def test_multilane_time_limit_truncates():
    env = MultiLaneEnv()
    zero_cost_state(env)
    env.set_state({
        "ego": [0.0, lane_center(1), 0.0, 0.0, 0.0, 0.0],
        "traffic": [], "ref_lane": 1, "target_speed": 3.0,
        "goal_x": 1e9, "steps": 0, "prev_a_x": 0.0, "prev_delta": 0.0,
    })
    for i in range(400):
        r = env.step([-0.4, 0.0])
    assert r.done and r.info["truncated"]


# ----------------------------------------------------------------- traces

def scripted_actions(n=60):
    rng = np.random.default_rng(0)
    low = np.array([-0.4, -0.025])
    high = np.array([0.25, 0.025])
    return [rng.uniform(low, high) for _ in range(n)]


def test_trace_roundtrip(tmp_path):
    env = MultiLaneEnv()
    path = tmp_path / "trace.jsonl"
    records = write_rollout_trace(path, env, scripted_actions(), seed=7)
    loaded = read_trace(path)
    assert loaded == records
    for rec in loaded:
        assert abs(rec["reward"] - sum(rec["components"].values())) <= 1e-9
        assert list(rec) == ["step", "time", "state", "action", "reward",
                             "components", "events"]


def test_trace_regeneration_is_byte_identical(tmp_path):
    env = MultiLaneEnv()
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_rollout_trace(p1, env, scripted_actions(), seed=7)
    write_rollout_trace(p2, MultiLaneEnv(), scripted_actions(), seed=7)
    assert p1.read_bytes() == p2.read_bytes()


def test_golden_trace(tmp_path):
    assert GOLDEN.exists(), "golden trace missing; run scripts/make_golden_trace.py"
    fresh = write_rollout_trace(tmp_path / "t.jsonl", MultiLaneEnv(),
                                scripted_actions(), seed=7)
    golden = read_trace(GOLDEN)
    assert len(fresh) == len(golden)

    def compare(a, b, path=""):
        if isinstance(a, dict):
            assert list(a) == list(b), path
            for k in a:
                compare(a[k], b[k], f"{path}.{k}")
        elif isinstance(a, list):
            assert len(a) == len(b), path
            for i, (x, y) in enumerate(zip(a, b)):
                compare(x, y, f"{path}[{i}]")
        elif isinstance(a, float):
            assert a == pytest.approx(b, abs=1e-12), path
        else:
            assert a == b, path

    for fa, fb in zip(fresh, golden):
        compare(fa, fb)
