"""Built-in-driver analog: pure pursuit plus curvature-limited speed.

Deliberately suboptimal on racing lines (it tracks the centerline), which
preserves the headroom the learned agents are expected to exploit. Also the
carrier for the disrupted-driving data collection: piecewise-constant uniform
action offsets push the car across the full track width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Action, VehicleParams, VehicleState
from .geometry import Track


@dataclass(frozen=True)
class PursuitParams:
    lookahead_base: float = 6.0  # m
    lookahead_speed_gain: float = 0.5  # s
    corner_accel_budget: float = 6.0  # m/s^2 target lateral acceleration
    speed_margin: float = 0.85  # fraction of the curvature-limited speed

    def validate(self) -> None:
        for name in ("lookahead_base", "lookahead_speed_gain", "corner_accel_budget",
                     "speed_margin"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.speed_margin > 1.0:
            raise ValueError("speed_margin must be in (0, 1]")


# proportional speed-tracking gain: desired accel = KP_SPEED * (v_target - v)
KP_SPEED = 1.8


def pursuit_action(track: Track, state: VehicleState, params: PursuitParams,
                   vehicle: VehicleParams) -> Action:
    """Steer toward a speed-scaled lookahead point on the centerline.

    Target speed is the curvature-limited speed over a braking-aware window
    ahead: speed_margin * sqrt(corner_accel_budget / max |curvature|), clamped
    to the vehicle's top speed.
    """
    s, _ = track.project(state.pose.position)
    v = state.speed

    lookahead = params.lookahead_base + params.lookahead_speed_gain * v
    target, _ = track.point_at(s + lookahead)
    to_target = target - state.pose.position
    dist = float(np.linalg.norm(to_target))
    alpha = math.atan2(to_target[1], to_target[0]) - state.pose.yaw
    steering = math.atan2(2.0 * vehicle.wheelbase * math.sin(alpha), max(dist, 1e-6))

    # window covers the braking distance from the current speed
    window = lookahead + v * v / (2.0 * 0.6 * vehicle.max_brake) + 5.0
    ahead = np.linspace(0.0, window, max(8, int(window / 2.0)))
    kappa_max = float(np.abs(track.curvature_lookahead(s, ahead)).max())
    if kappa_max > 1e-9:
        v_target = params.speed_margin * math.sqrt(params.corner_accel_budget / kappa_max)
    else:
        v_target = vehicle.max_speed
    v_target = min(v_target, vehicle.max_speed)

    accel = KP_SPEED * (v_target - v)
    omega = accel / vehicle.max_accel if accel >= 0.0 else accel / vehicle.max_brake
    return Action(steering=steering, throttle_brake=omega).clamped()


@dataclass
class DisruptionState:
    """Piecewise-constant uniform action offsets, resampled every hold_ticks."""

    steer_amplitude: float = 0.18  # rad
    throttle_amplitude: float = 0.40
    hold_ticks: int = 45
    _steer_offset: float = 0.0
    _throttle_offset: float = 0.0
    _ticks_left: int = 0

    def reset(self) -> None:
        self._ticks_left = 0

    def next_offsets(self, rng: np.random.Generator) -> tuple[float, float]:
        if self._ticks_left <= 0:
            self._steer_offset = rng.uniform(-self.steer_amplitude, self.steer_amplitude)
            self._throttle_offset = rng.uniform(
                -self.throttle_amplitude, self.throttle_amplitude
            )
            self._ticks_left = self.hold_ticks
        self._ticks_left -= 1
        return self._steer_offset, self._throttle_offset


def disrupted_action(base: Action, noise: DisruptionState, rng: np.random.Generator) -> Action:
    """Baseline action plus the held uniform offsets, clamped to bounds."""
    d_steer, d_throttle = noise.next_offsets(rng)
    return Action(
        steering=base.steering + d_steer,
        throttle_brake=base.throttle_brake + d_throttle,
    ).clamped()
