"""Racing environment loop: ticks, delayed frames, trials, lap evaluation.

The control loop runs at 60 Hz. Each tick renders the current view into a
delay buffer (the policy sees the frame from ``frame_delay`` ticks ago, the
dedicated features stay current-tick), steps the dynamics, resolves wall
contact and accumulates the course-progress reward. Policies may act every
``control_steps_per_env_step`` ticks with the action held in between.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, obs as obs_mod
from .dynamics import Action, VehicleParams, VehicleState
from .geometry import Track
from .render import CameraSpec, Frame, render_view
from .sac import PolicyNet, SacConfig


def compute_reward(track: Track, s_prev: float, s_curr: float, velocity,
                   contact: bool, c_w: float) -> float:
    """Course progress minus the wall penalty c_w * |v|^2 on contact ticks."""
    r = track.progress_delta(s_prev, s_curr)
    if contact:
        v = np.asarray(velocity)
        r -= c_w * float(v @ v)
    return r


class DelayedFrameBuffer:
    """Returns the frame rendered k ticks ago; the first k ticks repeat tick 0."""

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("delay must be >= 0")
        self.k = k
        self._buf: deque[Frame] = deque(maxlen=k + 1)

    def reset(self) -> None:
        self._buf.clear()

    def push(self, frame: Frame) -> Frame:
        self._buf.append(frame)
        return self._buf[0]


class RacingEnv:
    """Single-car environment; owns the mutable vehicle state."""

    def __init__(self, track: Track, vehicle: VehicleParams, c_w: float,
                 dt: float = dynamics.DT):
        self.track = track
        self.vehicle = vehicle
        self.c_w = c_w
        self.dt = dt
        self.state: VehicleState | None = None
        self.prev_state: VehicleState | None = None
        self.s = 0.0
        self.lateral = 0.0
        self.tick_index = 0

    def reset(self, s: float = 0.0, lateral: float = 0.0, heading_offset: float = 0.0,
              speed: float = 0.0) -> VehicleState:
        pose = self.track.pose_at(s, lateral=lateral, heading_offset=heading_offset)
        self.state = dynamics.initial_state(pose, speed=speed)
        self.prev_state = self.state
        self.s, self.lateral = self.track.project(pose.position)
        self.tick_index = 0
        return self.state

    def tick(self, action: Action) -> tuple[float, bool]:
        """One 60 Hz step; returns (reward, wall_contact)."""
        prev = self.state
        stepped = dynamics.step(prev, action, self.vehicle, self.dt)
        impact_velocity = stepped.velocity  # penalty uses the pre-resolution speed
        resolved, contact = dynamics.resolve_walls(self.track, stepped, self.vehicle)
        s_new, lat = self.track.project(resolved.pose.position)
        reward = compute_reward(self.track, self.s, s_new, impact_velocity, contact, self.c_w)
        self.prev_state = prev
        self.state = resolved
        self.s = s_new
        self.lateral = lat
        self.tick_index += 1
        return reward, contact

    def dedicated(self) -> np.ndarray:
        return dynamics.dedicated_snapshot(self.prev_state, self.state, self.dt)


class VisionSource:
    """Policy input from the delayed rendered frame plus current dedicated features."""

    obs_dim = obs_mod.POLICY_DIM

    def __init__(self, embed_fn, camera: CameraSpec, frame_delay: int):
        self.embed_fn = embed_fn
        self.camera = camera
        self.buffer = DelayedFrameBuffer(frame_delay)
        self._delayed: Frame | None = None

    def reset(self, env: RacingEnv) -> None:
        self.buffer.reset()
        self.on_tick(env)

    def on_tick(self, env: RacingEnv) -> None:
        frame = render_view(env.track, env.state.pose, self.camera,
                            timestamp=env.tick_index)
        self._delayed = self.buffer.push(frame)

    def observe(self, env: RacingEnv) -> np.ndarray:
        embedding = self.embed_fn(self._delayed.data)
        return obs_mod.assemble_policy_input(embedding, env.dedicated()).astype(np.float32)

    @property
    def frame_timestamp(self) -> int:
        return self._delayed.timestamp


class PrivilegedSource:
    """Ground-truth standardized EnvObservation plus dedicated features (38-dim)."""

    obs_dim = obs_mod.ENV_DIM + obs_mod.DEDICATED_DIM

    def __init__(self, standardizer, lookahead=None):
        self.standardizer = standardizer
        self.lookahead = lookahead

    def reset(self, env: RacingEnv) -> None:
        pass

    def on_tick(self, env: RacingEnv) -> None:
        pass

    def observe(self, env: RacingEnv) -> np.ndarray:
        env_obs = obs_mod.env_observation(env.track, env.state, lookahead=self.lookahead)
        z = self.standardizer.apply(env_obs)
        return np.concatenate([z, env.dedicated()]).astype(np.float32)

    @property
    def frame_timestamp(self) -> int:
        return -1  # no capture path


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    truncated: bool


@dataclass
class TrialResult:
    transitions: list[Transition]
    total_reward: float
    wall_contact_ticks: int
    # per decision: (state tick, frame timestamp used by the policy input)
    decision_log: list[tuple[int, int]] = field(default_factory=list)
    # per tick: (tick, s, lateral, speed, contact)
    trace: list[tuple[int, float, float, float, bool]] = field(default_factory=list)


def run_trial(env: RacingEnv, source, act_fn, cfg: SacConfig,
              rng: np.random.Generator | None = None, start=None,
              record_trace: bool = False) -> TrialResult:
    """One driving trial of cfg.trial_duration_s at 60 Hz.

    start is (s, lateral, heading_offset, speed); None draws a uniformly
    random start arclength with small lateral/heading jitter from rng.
    """
    if start is None:
        start = (
            float(rng.uniform(0.0, env.track.length)),
            float(rng.uniform(-1.0, 1.0)),
            float(rng.uniform(-0.1, 0.1)),
            cfg.trial_start_speed,
        )
    env.reset(*start)
    source.reset(env)

    repeat = cfg.control_steps_per_env_step
    total_ticks = int(round(cfg.trial_duration_s / env.dt))
    n_transitions = total_ticks // repeat

    transitions: list[Transition] = []
    decision_log: list[tuple[int, int]] = []
    trace: list[tuple[int, float, float, float, bool]] = []
    total_reward = 0.0
    contact_ticks = 0

    observation = source.observe(env)
    for k in range(n_transitions):
        decision_log.append((env.tick_index, source.frame_timestamp))
        action_vec = np.asarray(act_fn(observation), dtype=np.float64)
        action = Action(float(action_vec[0]), float(action_vec[1]))
        reward = 0.0
        for _ in range(repeat):
            r, contact = env.tick(action)
            source.on_tick(env)
            reward += r
            contact_ticks += int(contact)
            if record_trace:
                st = env.state
                trace.append((env.tick_index, env.s, env.lateral, st.speed, contact))
        next_observation = source.observe(env)
        truncated = k == n_transitions - 1
        transitions.append(
            Transition(observation, action_vec.astype(np.float32), reward,
                       next_observation, done=False, truncated=truncated)
        )
        total_reward += reward
        observation = next_observation

    return TrialResult(
        transitions=transitions,
        total_reward=total_reward,
        wall_contact_ticks=contact_ticks,
        decision_log=decision_log,
        trace=trace,
    )


@dataclass
class LapReport:
    lap_times: list[float]
    second_lap_time: float  # nan on DNF
    dnf: bool
    wall_contact_count: int  # contact events (rising edges) during the laps
    trajectory: np.ndarray  # (ticks, 5): tick, s, lateral, speed, contact


def evaluate_policy(env: RacingEnv, policy: PolicyNet, source, cfg: SacConfig,
                    dnf_time_s: float, start_speed: float,
                    start_s: float = 0.0) -> LapReport:
    """Two consecutive flying-start laps, deterministic actions; lap 2 scores.

    The run starts exactly on the lap line at start_speed; lap boundaries are
    sub-tick interpolated from the unwrapped course progress. DNF (reported,
    not raised) if the time budget elapses before two crossings.
    """
    env.reset(start_s, 0.0, 0.0, start_speed)
    source.reset(env)

    repeat = cfg.control_steps_per_env_step
    max_ticks = int(math.ceil(dnf_time_s / env.dt))
    length = env.track.length

    progress = 0.0
    crossings: list[float] = []
    rows = []
    contacts = 0
    prev_contact = False

    observation = source.observe(env)
    action = Action(0.0, 0.0)
    tick = 0
    while tick < max_ticks and len(crossings) < 2:
        if tick % repeat == 0:
            a = policy.deterministic_batch(observation[None, :])[0]
            action = Action(float(a[0]), float(a[1]))
        s_before = env.s
        _, contact = env.tick(action)
        source.on_tick(env)
        if tick % repeat == repeat - 1:
            observation = source.observe(env)
        delta = env.track.progress_delta(s_before, env.s)
        new_progress = progress + delta
        for lap_i in (1, 2):
            boundary = lap_i * length
            if progress < boundary <= new_progress:
                frac = (boundary - progress) / max(delta, 1e-12)
                crossings.append((tick + frac) * env.dt)
        progress = new_progress
        if contact and not prev_contact:
            contacts += 1
        prev_contact = contact
        st = env.state
        rows.append((env.tick_index, env.s, env.lateral, st.speed, float(contact)))
        tick += 1

    lap_times: list[float] = []
    if len(crossings) >= 1:
        lap_times.append(crossings[0])
    if len(crossings) >= 2:
        lap_times.append(crossings[1] - crossings[0])
    dnf = len(crossings) < 2
    return LapReport(
        lap_times=lap_times,
        second_lap_time=lap_times[1] if not dnf else float("nan"),
        dnf=dnf,
        wall_contact_count=contacts,
        trajectory=np.array(rows, dtype=np.float64).reshape(-1, 5),
    )


def evaluate_baseline(track: Track, vehicle: VehicleParams, pursuit_params,
                      start_speed: float, dnf_time_s: float = 600.0,
                      start_s: float = 0.0) -> LapReport:
    """Two flying-start laps driven by pure pursuit; mirror of evaluate_policy."""
    from .baseline import pursuit_action

    env = RacingEnv(track, vehicle, c_w=0.0)
    env.reset(start_s, 0.0, 0.0, start_speed)
    length = track.length
    max_ticks = int(math.ceil(dnf_time_s / env.dt))
    progress = 0.0
    crossings: list[float] = []
    rows = []
    contacts = 0
    prev_contact = False
    tick = 0
    while tick < max_ticks and len(crossings) < 2:
        action = pursuit_action(track, env.state, pursuit_params, vehicle)
        s_before = env.s
        _, contact = env.tick(action)
        delta = track.progress_delta(s_before, env.s)
        new_progress = progress + delta
        for lap_i in (1, 2):
            boundary = lap_i * length
            if progress < boundary <= new_progress:
                frac = (boundary - progress) / max(delta, 1e-12)
                crossings.append((tick + frac) * env.dt)
        progress = new_progress
        if contact and not prev_contact:
            contacts += 1
        prev_contact = contact
        rows.append((env.tick_index, env.s, env.lateral, env.state.speed, float(contact)))
        tick += 1

    lap_times: list[float] = []
    if len(crossings) >= 1:
        lap_times.append(crossings[0])
    if len(crossings) >= 2:
        lap_times.append(crossings[1] - crossings[0])
    dnf = len(crossings) < 2
    return LapReport(
        lap_times=lap_times,
        second_lap_time=lap_times[1] if not dnf else float("nan"),
        dnf=dnf,
        wall_contact_count=contacts,
        trajectory=np.array(rows, dtype=np.float64).reshape(-1, 5),
    )


def baseline_lap_time(track: Track, vehicle: VehicleParams, pursuit_params,
                      max_time_s: float = 600.0) -> tuple[float, float]:
    """Pure-pursuit two-lap run; returns (second lap time, straight-line speed).

    The straight-line speed (the speed the baseline settles at on the longest
    straight) doubles as the flying-start speed for evaluations.
    """
    from .baseline import pursuit_action

    env = RacingEnv(track, vehicle, c_w=0.0)
    env.reset(0.0, 0.0, 0.0, 0.0)
    length = track.length
    progress = 0.0
    crossings: list[float] = []
    top_speed = 0.0
    tick = 0
    max_ticks = int(max_time_s / env.dt)
    while tick < max_ticks and len(crossings) < 3:
        action = pursuit_action(track, env.state, pursuit_params, vehicle)
        s_before = env.s
        env.tick(action)
        delta = track.progress_delta(s_before, env.s)
        new_progress = progress + delta
        for lap_i in (1, 2, 3):
            boundary = lap_i * length
            if progress < boundary <= new_progress:
                frac = (boundary - progress) / max(delta, 1e-12)
                crossings.append((tick + frac) * env.dt)
        progress = new_progress
        top_speed = max(top_speed, env.state.speed)
        tick += 1
    if len(crossings) < 3:
        raise RuntimeError("baseline failed to complete three laps")
    # lap 3 is fully flying (lap 1 spends time accelerating from rest)
    return crossings[2] - crossings[1], top_speed
