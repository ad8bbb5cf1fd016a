"""Tiny 1D continuous-control environment for optimizer sanity runs.

State x ~ U(-1, 1) redrawn every step, action a in [-1, 1], reward -(x - a)^2.
The optimal deterministic policy is the identity; mean evaluation reward
approaches 0 from below.
"""

from __future__ import annotations

import numpy as np

from .replay import ReplayBuffer
from .sac import SacAgent, SacConfig, sac_update


class ToyEnv:
    obs_dim = 1
    act_dim = 1

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.x = float(self.rng.uniform(-1.0, 1.0))

    def observe(self) -> np.ndarray:
        return np.array([self.x], dtype=np.float32)

    def step(self, action: float) -> tuple[np.ndarray, float]:
        reward = -((self.x - float(action)) ** 2)
        self.x = float(self.rng.uniform(-1.0, 1.0))
        return self.observe(), reward


def evaluate_toy_policy(agent: SacAgent, n: int = 256) -> float:
    xs = np.linspace(-1.0, 1.0, n, dtype=np.float32)[:, None]
    acts = agent.policy.deterministic_batch(xs)[:, 0]
    return float(-np.mean((xs[:, 0] - acts) ** 2))


def run_toy_sac(seed: int, updates: int = 5000, warmup: int = 500,
                cfg: SacConfig | None = None) -> float:
    """Train SAC on the toy task; returns final mean evaluation reward."""
    if cfg is None:
        cfg = SacConfig(batch_size=128, initial_random_steps=warmup,
                        replay_capacity=20_000, target_entropy=-1.0)
    env = ToyEnv(seed)
    agent = SacAgent.create(ToyEnv.obs_dim, cfg, seed=seed, action_scales=(1.0,))
    buffer = ReplayBuffer(cfg.replay_capacity, ToyEnv.obs_dim, ToyEnv.act_dim)
    rng = np.random.default_rng(seed + 1)

    obs = env.observe()
    for _ in range(cfg.initial_random_steps):
        a = rng.uniform(-1.0, 1.0)
        next_obs, r = env.step(a)
        buffer.add(obs, [a], r, next_obs, False)
        obs = next_obs

    for _ in range(updates):
        actions, _, _ = agent.policy.sample_batch(obs[None, :], rng)
        next_obs, r = env.step(actions[0, 0])
        buffer.add(obs, actions[0], r, next_obs, False)
        obs = next_obs
        sac_update(buffer, agent, cfg, rng)
    return evaluate_toy_policy(agent)
