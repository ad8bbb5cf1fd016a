"""Deterministic vehicle simulation: kinematic bicycle with grip and wall contact.

The model is the simplest one where racing lines matter: corner speed is
limited by ``lateral_grip`` (steering saturates so commanded lateral
acceleration never exceeds it), so cutting corners pays off. Integration is
semi-implicit Euler at a fixed control rate (60 Hz by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState
from .geometry import Pose, Track, wrap_angle

CONTROL_RATE_HZ = 60.0
DT = 1.0 / CONTROL_RATE_HZ

STEER_LIMIT = math.pi / 6.0  # |delta| bound, radians
DEDICATED_DIM = 11

# slack above the wall-contact limit so a freshly clamped state (float noise
# ~1e-15 m) does not re-trigger contact; keeps resolve_walls idempotent
_CONTACT_EPS = 1e-12


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.5  # m
    max_accel: float = 6.0  # m/s^2 at full throttle
    max_brake: float = 10.0  # m/s^2 at full brake
    max_speed: float = 18.0  # m/s
    lateral_grip: float = 8.0  # m/s^2, saturates steering and lateral slip decay
    wall_restitution: float = 0.2  # in [0, 1)
    wall_tangential_damping: float = 0.7  # in (0, 1]
    half_width: float = 1.0  # m, body clearance used for wall contact

    def validate(self) -> None:
        for name in ("wheelbase", "max_accel", "max_brake", "max_speed",
                     "lateral_grip", "wall_tangential_damping", "half_width"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.wall_restitution < 1.0:
            raise ValueError("wall_restitution must be in [0, 1)")
        if self.wall_tangential_damping > 1.0:
            raise ValueError("wall_tangential_damping must be in (0, 1]")


@dataclass(frozen=True)
class Action:
    """Control command: steering angle and combined throttle/brake scalar."""

    steering: float  # radians in [-pi/6, pi/6]
    throttle_brake: float  # [-1, 1], negative = brake

    def clamped(self) -> "Action":
        return Action(
            steering=min(max(self.steering, -STEER_LIMIT), STEER_LIMIT),
            throttle_brake=min(max(self.throttle_brake, -1.0), 1.0),
        )


@dataclass(frozen=True)
class VehicleState:
    pose: Pose
    velocity: np.ndarray  # (2,), world frame, m/s
    yaw_rate: float
    prev_steering: float
    wall_contact: bool
    time: float

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=np.float64))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))

    def body_velocity(self) -> tuple[float, float]:
        """(longitudinal, lateral) velocity in the vehicle frame."""
        c, s = math.cos(self.pose.yaw), math.sin(self.pose.yaw)
        vx, vy = self.velocity
        return vx * c + vy * s, -vx * s + vy * c


def initial_state(pose: Pose, speed: float = 0.0) -> VehicleState:
    vel = speed * np.array([math.cos(pose.yaw), math.sin(pose.yaw)])
    return VehicleState(pose=pose, velocity=vel, yaw_rate=0.0, prev_steering=0.0,
                        wall_contact=False, time=0.0)


def step(state: VehicleState, action: Action, params: VehicleParams, dt: float = DT) -> VehicleState:
    """Advance one control tick.

    Longitudinal acceleration follows the throttle/brake scalar; steering is
    saturated so v^2 * tan(delta) / wheelbase stays within lateral_grip; any
    lateral slip (from wall bounces) decays at the grip rate. Braking never
    reverses the car.
    """
    act = action.clamped()
    v_long, v_lat = state.body_velocity()

    omega = act.throttle_brake
    accel = omega * (params.max_accel if omega >= 0.0 else params.max_brake)
    v_long = v_long + accel * dt
    v_long = min(max(v_long, 0.0), params.max_speed)

    # lateral slip decays at the grip-limited rate
    if v_lat > 0.0:
        v_lat = max(0.0, v_lat - params.lateral_grip * dt)
    else:
        v_lat = min(0.0, v_lat + params.lateral_grip * dt)

    tan_d = math.tan(act.steering)
    if v_long > 1e-6:
        tan_limit = params.lateral_grip * params.wheelbase / (v_long * v_long)
        tan_d = min(max(tan_d, -tan_limit), tan_limit)
    yaw_rate = v_long * tan_d / params.wheelbase

    yaw = wrap_angle(state.pose.yaw + yaw_rate * dt)
    c, s = math.cos(yaw), math.sin(yaw)
    velocity = np.array([v_long * c - v_lat * s, v_long * s + v_lat * c])
    position = state.pose.position + velocity * dt

    new = VehicleState(
        pose=Pose(position=position, yaw=yaw),
        velocity=velocity,
        yaw_rate=yaw_rate,
        prev_steering=act.steering,
        wall_contact=False,
        time=state.time + dt,
    )
    if not (
        np.isfinite(position).all()
        and np.isfinite(velocity).all()
        and math.isfinite(yaw)
        and math.isfinite(yaw_rate)
    ):
        raise NonFiniteState(f"state became non-finite at t={state.time:.3f}")
    return new


def resolve_walls(track: Track, state: VehicleState, params: VehicleParams) -> tuple[VehicleState, bool]:
    """Clamp the body inside the edges and reflect the velocity on contact.

    Contact happens when |lateral| exceeds width/2 - half_width. The normal
    velocity component (into the wall) is multiplied by -wall_restitution,
    the tangential component by wall_tangential_damping.
    """
    s, lateral = track.project(state.pose.position)
    limit = 0.5 * track.width - params.half_width
    if abs(lateral) <= limit + _CONTACT_EPS:
        return state, False

    pos_center, tangent = track.point_at(s)
    normal = np.array([-tangent[1], tangent[0]])
    side = 1.0 if lateral > 0.0 else -1.0
    position = pos_center + side * limit * normal

    v_t = float(np.dot(state.velocity, tangent))
    v_n = float(np.dot(state.velocity, normal))
    # reflect only when still moving into the wall
    if v_n * side > 0.0:
        v_n = -params.wall_restitution * v_n
    v_t *= params.wall_tangential_damping
    velocity = v_t * tangent + v_n * normal

    new = VehicleState(
        pose=Pose(position=position, yaw=state.pose.yaw),
        velocity=velocity,
        yaw_rate=state.yaw_rate,
        prev_steering=state.prev_steering,
        wall_contact=True,
        time=state.time,
    )
    return new, True


def dedicated_snapshot(state_prev: VehicleState, state: VehicleState, dt: float = DT) -> np.ndarray:
    """The 11 directly-sensed policy features, fixed order.

    [v_long, v_lat, v_vert=0, a_long, a_lat, a_vert=0, roll=0, pitch=0,
     yaw_rate, wall_contact, prev_steering]; accelerations are finite
    differences of the body-frame velocity over dt. Vertical/roll/pitch
    slots are identically zero in the planar simulator.
    """
    v_long, v_lat = state.body_velocity()
    p_long, p_lat = state_prev.body_velocity()
    out = np.zeros(DEDICATED_DIM, dtype=np.float64)
    out[0] = v_long
    out[1] = v_lat
    out[3] = (v_long - p_long) / dt
    out[4] = (v_lat - p_lat) / dt
    out[8] = state.yaw_rate
    out[9] = 1.0 if state.wall_contact else 0.0
    out[10] = state.prev_steering
    return out
