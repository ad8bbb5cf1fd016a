"""Phase 2: train the driving policy with SAC on top of the frozen embedding.

Protocol: epochs of ``trials_per_epoch`` trials (random start arclength each),
an update round of ``updates_per_transition * collected`` gradient steps, then
a deterministic two-lap evaluation whose second lap is the epoch score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envloop import (
    LapReport,
    PrivilegedSource,
    RacingEnv,
    VisionSource,
    evaluate_policy,
    run_trial,
)
from .errors import NonFiniteLoss
from .phase1 import ReprNetwork
from .replay import ReplayBuffer
from .sac import SacAgent, SacConfig, sac_update

# named rng stream ids under the root seed
_STREAM_TRIAL = 1
_STREAM_SAC = 2

CURVE_FIELDS = ["epoch", "trials", "env_steps", "eval_lap_time_s", "dnf_flag",
                "mean_reward", "wall_contacts"]


@dataclass
class EpochRow:
    epoch: int
    trials: int
    env_steps: int
    eval_lap_time_s: float  # nan on DNF
    dnf_flag: int
    mean_reward: float
    wall_contacts: int

    def as_list(self):
        return [self.epoch, self.trials, self.env_steps, self.eval_lap_time_s,
                self.dnf_flag, self.mean_reward, self.wall_contacts]


def make_source(mode: str, repr_net: ReprNetwork, cfg: SacConfig):
    """Observation source for the policy: vision (75-dim) or privileged (38-dim)."""
    if mode == "vision":
        return VisionSource(repr_net.embed, repr_net.camera, cfg.frame_delay)
    if mode == "privileged":
        return PrivilegedSource(repr_net.standardizer)
    raise ValueError(f"unknown observation mode {mode!r}")


@dataclass
class TrainResult:
    agent: SacAgent
    rows: list[EpochRow]
    best_report: LapReport | None
    best_epoch: int


def train_policy(env: RacingEnv, repr_net: ReprNetwork, cfg: SacConfig, seed: int,
                 mode: str = "vision", eval_dnf_time_s: float = 600.0,
                 eval_start_speed: float = 10.0, checkpoint_fn=None,
                 log=None) -> TrainResult:
    """Train one seed; returns the agent, the learning curve and the best eval.

    checkpoint_fn(tag, agent, epoch) persists checkpoints ("last", "best",
    "last_good" before a NonFiniteLoss propagates). The Phase-1 artifact is
    frozen throughout: only the policy and critics learn.
    """
    cfg.validate()
    source = make_source(mode, repr_net, cfg)
    agent = SacAgent.create(source.obs_dim, cfg, seed=seed)
    buffer = ReplayBuffer(cfg.replay_capacity, source.obs_dim, agent.policy.act_dim)
    sac_rng = np.random.default_rng([seed, _STREAM_SAC])

    scales = agent.policy.scales
    random_steps_left = cfg.initial_random_steps
    env_steps = 0
    trials_done = 0
    best = (math.inf, None, -1)
    rows: list[EpochRow] = []

    for epoch in range(cfg.epochs):
        epoch_reward_sum = 0.0
        epoch_transitions = 0
        for trial in range(cfg.trials_per_epoch):
            rng = np.random.default_rng([seed, _STREAM_TRIAL, epoch, trial])

            def act_fn(observation):
                nonlocal random_steps_left
                if random_steps_left > 0:
                    random_steps_left -= 1
                    return rng.uniform(-scales, scales)
                a, _, _ = agent.policy.sample_batch(observation[None, :], rng)
                return a[0]

            result = run_trial(env, source, act_fn, cfg, rng=rng)
            for tr in result.transitions:
                buffer.add(tr.obs, tr.action, tr.reward, tr.next_obs, tr.done)
            epoch_reward_sum += result.total_reward
            epoch_transitions += len(result.transitions)
            trials_done += 1
        env_steps += epoch_transitions

        n_updates = int(round(cfg.updates_per_transition * epoch_transitions))
        try:
            for _ in range(n_updates):
                if len(buffer) >= cfg.batch_size:
                    sac_update(buffer, agent, cfg, sac_rng)
        except NonFiniteLoss:
            if checkpoint_fn is not None:
                checkpoint_fn("last_good", agent, epoch)
            raise

        report = evaluate_policy(env, agent.policy, source, cfg,
                                 dnf_time_s=eval_dnf_time_s,
                                 start_speed=eval_start_speed)
        row = EpochRow(
            epoch=epoch,
            trials=trials_done,
            env_steps=env_steps,
            eval_lap_time_s=report.second_lap_time,
            dnf_flag=int(report.dnf),
            mean_reward=epoch_reward_sum / max(epoch_transitions, 1),
            wall_contacts=report.wall_contact_count,
        )
        rows.append(row)
        if log is not None:
            lap = "DNF" if report.dnf else f"{report.second_lap_time:7.2f}s"
            log(f"[seed {seed} {mode}] epoch {epoch:3d}: lap {lap} "
                f"contacts {report.wall_contact_count:2d} "
                f"mean_r {row.mean_reward:6.3f} alpha {agent.alpha:.4f}")
        if checkpoint_fn is not None:
            checkpoint_fn("last", agent, epoch)
        if not report.dnf and report.second_lap_time < best[0]:
            best = (report.second_lap_time, report, epoch)
            if checkpoint_fn is not None:
                checkpoint_fn("best", agent, epoch)

    return TrainResult(agent=agent, rows=rows, best_report=best[1], best_epoch=best[2])
