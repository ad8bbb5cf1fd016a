import math

import numpy as np
import pytest

from visracer import dynamics
from visracer.dynamics import Action, VehicleParams, initial_state, resolve_walls, step
from visracer.geometry import Pose


PARAMS = VehicleParams()


def make_state(x=0.0, y=0.0, yaw=0.0, speed=0.0):
    return initial_state(Pose(position=np.array([x, y]), yaw=yaw), speed=speed)


def test_rest_stays_at_rest():
    s0 = make_state()
    s1 = step(s0, Action(0.0, 0.0), PARAMS)
    assert np.array_equal(s1.pose.position, s0.pose.position)
    assert s1.speed == 0.0
    assert s1.pose.yaw == s0.pose.yaw
    assert s1.time == pytest.approx(dynamics.DT)


def test_full_throttle_monotone_bounded():
    s = make_state()
    speeds = []
    for _ in range(1500):
        s = step(s, Action(0.0, 1.0), PARAMS)
        speeds.append(s.speed)
    assert all(b >= a - 1e-12 for a, b in zip(speeds, speeds[1:]))
    assert max(speeds) <= PARAMS.max_speed + 1e-9
    assert speeds[-1] == pytest.approx(PARAMS.max_speed, abs=1e-6)


def test_constant_steering_traces_circle():
    delta, v = 0.2, 8.0
    radius = PARAMS.wheelbase / math.tan(delta)
    s = make_state(speed=v)
    n = int(round(2.0 * math.pi * radius / v / dynamics.DT))
    for _ in range(n):
        s = step(s, Action(delta, 0.0), PARAMS)
    err = np.linalg.norm(s.pose.position)
    assert err < 0.01 * 2.0 * math.pi * radius


def test_steering_saturates_at_grip_limit():
    v = PARAMS.max_speed
    s = make_state(speed=v)
    s = step(s, Action(dynamics.STEER_LIMIT, 0.0), PARAMS)
    lateral_acc = s.speed * abs(s.yaw_rate)
    assert lateral_acc <= PARAMS.lateral_grip + 1e-6


def test_no_reverse():
    s = make_state(speed=0.5)
    for _ in range(120):
        s = step(s, Action(0.0, -1.0), PARAMS)
    assert s.speed == 0.0


def test_braking_never_increases_speed():
    rng = np.random.default_rng(2)
    s = make_state(speed=15.0)
    prev = s.speed
    for _ in range(400):
        act = Action(rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 0.0))
        s = step(s, act, PARAMS)
        assert s.speed <= prev + 1e-9
        prev = s.speed


def test_determinism_bit_identical():
    rng = np.random.default_rng(3)
    actions = [Action(rng.uniform(-0.6, 0.6), rng.uniform(-1, 1)) for _ in range(300)]

    def run():
        s = make_state(speed=5.0)
        out = []
        for a in actions:
            s = step(s, a, PARAMS)
            out.append((s.pose.position[0], s.pose.position[1], s.pose.yaw, s.speed))
        return out

    assert run() == run()


def test_out_of_bounds_actions_clamped():
    s = make_state(speed=5.0)
    s1 = step(s, Action(10.0, 5.0), PARAMS)
    s2 = step(s, Action(dynamics.STEER_LIMIT, 1.0), PARAMS)
    assert s1.prev_steering == dynamics.STEER_LIMIT
    assert np.array_equal(s1.velocity, s2.velocity)


def test_states_stay_finite_under_random_input():
    rng = np.random.default_rng(4)
    s = make_state(speed=10.0)
    for _ in range(2000):
        s = step(s, Action(rng.uniform(-1, 1), rng.uniform(-1.5, 1.5)), PARAMS)
    assert np.isfinite(s.pose.position).all()


# ---------------------------------------------------------------- walls

def test_resolve_inside_unchanged(stadium_track):
    t = stadium_track
    s = initial_state(t.pose_at(60.0, lateral=2.0), speed=10.0)
    s2, contact = resolve_walls(t, s, PARAMS)
    assert not contact
    assert s2 is s


def test_normal_impact_zero_restitution(stadium_track):
    t = stadium_track
    params = VehicleParams(wall_restitution=0.0)
    limit = 0.5 * t.width - params.half_width
    # beyond the left boundary on the bottom straight, still moving left (+y)
    pose = t.pose_at(100.0, lateral=limit + 0.3)
    state = dynamics.VehicleState(
        pose=pose, velocity=np.array([0.0, 6.0]), yaw_rate=0.0,
        prev_steering=0.0, wall_contact=False, time=0.0,
    )
    out, contact = resolve_walls(t, state, params)
    assert contact and out.wall_contact
    _, lat = t.project(out.pose.position)
    assert lat == pytest.approx(limit, abs=1e-9)
    assert abs(out.velocity[1]) < 1e-12  # normal component zeroed


def test_grazing_impact_damps_tangential_exactly(stadium_track):
    t = stadium_track
    limit = 0.5 * t.width - PARAMS.half_width
    speed = 12.0
    incidence = math.radians(10.0)
    vel = speed * np.array([math.cos(incidence), math.sin(incidence)])
    pose = t.pose_at(90.0, lateral=limit + 0.05)
    state = dynamics.VehicleState(
        pose=pose, velocity=vel, yaw_rate=0.0, prev_steering=0.0,
        wall_contact=False, time=0.0,
    )
    out, contact = resolve_walls(t, state, PARAMS)
    assert contact
    # bottom straight runs along +x: tangential = x, normal = y
    assert out.velocity[0] == pytest.approx(vel[0] * PARAMS.wall_tangential_damping, rel=1e-9)
    assert out.velocity[1] == pytest.approx(-vel[1] * PARAMS.wall_restitution, rel=1e-9)


def test_resolve_idempotent(chicane_track):
    t = chicane_track
    rng = np.random.default_rng(5)
    for _ in range(50):
        s_arc = rng.uniform(0.0, t.length)
        lat = rng.choice([-1.0, 1.0]) * rng.uniform(5.2, 6.5)
        pose = t.pose_at(s_arc, lateral=lat, heading_offset=rng.uniform(-0.5, 0.5))
        state = dynamics.VehicleState(
            pose=pose, velocity=rng.uniform(-8, 8, 2), yaw_rate=0.0,
            prev_steering=0.0, wall_contact=False, time=0.0,
        )
        once, c1 = resolve_walls(t, state, PARAMS)
        twice, c2 = resolve_walls(t, once, PARAMS)
        assert c1
        assert not c2
        assert np.array_equal(once.velocity, twice.velocity)
        assert np.array_equal(once.pose.position, twice.pose.position)


def test_resolve_bounds_lateral(chicane_track):
    t = chicane_track
    limit = 0.5 * t.width - PARAMS.half_width
    rng = np.random.default_rng(6)
    for _ in range(100):
        pose = t.pose_at(rng.uniform(0, t.length), lateral=rng.uniform(-7.0, 7.0))
        state = dynamics.VehicleState(
            pose=pose, velocity=rng.uniform(-10, 10, 2), yaw_rate=0.0,
            prev_steering=0.0, wall_contact=False, time=0.0,
        )
        out, _ = resolve_walls(t, state, PARAMS)
        _, lat = t.project(out.pose.position)
        assert abs(lat) <= limit + 1e-9


# ---------------------------------------------------------------- dedicated features

def test_snapshot_at_rest_all_zero():
    s0 = make_state()
    s1 = step(s0, Action(0.0, 0.0), PARAMS)
    ded = dynamics.dedicated_snapshot(s0, s1)
    assert ded.shape == (11,)
    assert np.all(ded == 0.0)


def test_snapshot_constant_velocity_zero_accel():
    s0 = make_state(speed=9.0)
    s1 = step(s0, Action(0.0, 0.0), PARAMS)
    s2 = step(s1, Action(0.0, 0.0), PARAMS)
    ded = dynamics.dedicated_snapshot(s1, s2)
    assert ded[0] == pytest.approx(9.0, abs=1e-9)   # longitudinal velocity
    assert ded[3] == pytest.approx(0.0, abs=1e-9)   # longitudinal acceleration
    assert ded[4] == pytest.approx(0.0, abs=1e-9)
    # planar simulator: vertical / roll / pitch slots identically zero
    assert ded[2] == 0.0 and ded[5] == 0.0 and ded[6] == 0.0 and ded[7] == 0.0


def test_snapshot_flags_and_steering(stadium_track):
    t = stadium_track
    params = PARAMS
    s0 = initial_state(t.pose_at(50.0, lateral=4.9), speed=10.0)
    s1 = step(s0, Action(0.25, 0.3), params)
    s1w, contact = resolve_walls(t, s1, params)
    ded = dynamics.dedicated_snapshot(s0, s1w)
    assert ded[9] == (1.0 if contact else 0.0)
    assert ded[10] == pytest.approx(0.25)
    assert ded[8] == pytest.approx(s1w.yaw_rate)
