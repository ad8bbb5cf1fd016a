"""Soft actor-critic for continuous control on the flat-buffer networks.

The policy is a tanh-squashed Gaussian scaled to the action bounds; gradients
of the actor, critic and temperature losses are hand-derived and fed through
Network.backward (the layer stack provides exact reverse-mode gradients, the
distribution algebra lives here and is finite-difference-tested).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import STEER_LIMIT
from .errors import NonFiniteLoss, NonFiniteObservation
from .nn import Adam, Dense, Network, ReLU
from .replay import ReplayBuffer

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# steering, combined throttle/brake
RACING_ACTION_SCALES = (STEER_LIMIT, 1.0)


@dataclass(frozen=True)
class SacConfig:
    discount: float = 0.98
    polyak: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    batch_size: int = 256
    replay_capacity: int = 300_000
    initial_random_steps: int = 3000
    target_entropy: float | None = None  # None -> -action_dim
    c_w: float = 0.01  # wall penalty weight, s^2/m^2
    trial_duration_s: float = 100.0
    trials_per_epoch: int = 20
    frame_delay: int = 4  # ticks the frame lags the dedicated features
    control_steps_per_env_step: int = 1  # action repeat at the 60 Hz control rate
    updates_per_transition: float = 1.0
    epochs: int = 400
    trial_start_speed: float = 8.0  # m/s at the random trial start

    def validate(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if not 0.0 < self.polyak <= 1.0:
            raise ValueError("polyak must be in (0, 1]")
        if self.c_w < 0.0:
            raise ValueError("c_w must be >= 0")
        if self.frame_delay < 0 or self.control_steps_per_env_step < 1:
            raise ValueError("frame_delay >= 0 and control_steps_per_env_step >= 1")


def mlp(in_dim: int, out_dim: int, seed: int, hidden: int = 256) -> Network:
    layers = [Dense(in_dim, hidden), ReLU(), Dense(hidden, hidden), ReLU(),
              Dense(hidden, out_dim)]
    return Network(layers, (in_dim,), rng_seed=seed)


def _stable_log1m_tanh2(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u))
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class PolicyNet:
    """Trunk 256-256 with a 4-unit head: action means and log-stds."""

    def __init__(self, obs_dim: int, action_scales=RACING_ACTION_SCALES, seed: int = 0):
        self.obs_dim = obs_dim
        self.scales = np.asarray(action_scales, dtype=np.float32)
        self.act_dim = self.scales.size
        self.net = mlp(obs_dim, 2 * self.act_dim, seed)

    def _heads(self, obs: np.ndarray):
        out, acts = self.net.forward(obs.astype(np.float32, copy=False))
        mu = out[:, : self.act_dim]
        raw_ls = out[:, self.act_dim :]
        log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
        clamp_mask = (raw_ls > LOG_STD_MIN) & (raw_ls < LOG_STD_MAX)
        return mu, log_std, clamp_mask, acts

    def sample_batch(self, obs: np.ndarray, rng: np.random.Generator):
        """Reparameterized sample: (actions, log_probs, cache for backward)."""
        mu, log_std, clamp_mask, acts = self._heads(obs)
        sigma = np.exp(log_std)
        eps = rng.standard_normal(mu.shape).astype(np.float32)
        u = mu + sigma * eps
        tanh_u = np.tanh(u)
        actions = self.scales * tanh_u
        log_prob = (
            -0.5 * eps * eps
            - log_std
            - _HALF_LOG_2PI
            - np.log(self.scales)
            - _stable_log1m_tanh2(u)
        ).sum(axis=1)
        cache = (acts, clamp_mask, eps, sigma, tanh_u)
        return actions, log_prob.astype(np.float32), cache

    def deterministic_batch(self, obs: np.ndarray) -> np.ndarray:
        mu, _, _, _ = self._heads(obs)
        return self.scales * np.tanh(mu)

    def backward_heads(self, cache, g_mu: np.ndarray, g_log_std: np.ndarray):
        """Backprop grads on (mu, log_std) through the trunk; returns param grads."""
        acts, clamp_mask, _, _, _ = cache
        head_grad = np.concatenate([g_mu, g_log_std * clamp_mask], axis=1).astype(np.float32)
        grads, _ = self.net.backward(acts, head_grad)
        return grads

    def copy(self) -> "PolicyNet":
        p = PolicyNet(self.obs_dim, self.scales, seed=0)
        p.net = self.net.copy()
        return p


def sample_action(policy: PolicyNet, obs: np.ndarray, mode: str = "stochastic",
                  rng: np.random.Generator | None = None):
    """Single-observation action; returns (action, log_prob).

    Stochastic mode draws from the squashed Gaussian (needs rng); deterministic
    mode returns the squashed mean with log_prob = nan.
    """
    obs = np.asarray(obs, dtype=np.float32).reshape(1, -1)
    if not np.isfinite(obs).all():
        raise NonFiniteObservation("policy observation contains non-finite values")
    if mode == "deterministic":
        return policy.deterministic_batch(obs)[0], float("nan")
    if rng is None:
        raise ValueError("stochastic sampling needs an rng")
    actions, log_prob, _ = policy.sample_batch(obs, rng)
    return actions[0], float(log_prob[0])


class CriticPair:
    """Twin Q-networks plus polyak-averaged target copies."""

    def __init__(self, obs_dim: int, act_dim: int, seed: int = 0):
        self.obs_dim = obs_dim
        self.q1 = mlp(obs_dim + act_dim, 1, seed * 2 + 101)
        self.q2 = mlp(obs_dim + act_dim, 1, seed * 2 + 102)
        self.t1 = self.q1.copy()
        self.t2 = self.q2.copy()

    def polyak_update(self, tau: float) -> None:
        self.t1.params += tau * (self.q1.params - self.t1.params)
        self.t2.params += tau * (self.q2.params - self.t2.params)


@dataclass
class SacAgent:
    policy: PolicyNet
    critics: CriticPair
    log_alpha: np.ndarray  # shape (1,) float32
    opt_actor: Adam
    opt_q1: Adam
    opt_q2: Adam
    opt_alpha: Adam
    target_entropy: float

    @classmethod
    def create(cls, obs_dim: int, cfg: SacConfig, seed: int = 0,
               action_scales=RACING_ACTION_SCALES) -> "SacAgent":
        policy = PolicyNet(obs_dim, action_scales, seed=seed)
        critics = CriticPair(obs_dim, policy.act_dim, seed=seed)
        target_entropy = (
            cfg.target_entropy if cfg.target_entropy is not None else -float(policy.act_dim)
        )
        return cls(
            policy=policy,
            critics=critics,
            log_alpha=np.zeros(1, dtype=np.float32),
            opt_actor=Adam(policy.net.num_params, lr=cfg.lr_actor),
            opt_q1=Adam(critics.q1.num_params, lr=cfg.lr_critic),
            opt_q2=Adam(critics.q2.num_params, lr=cfg.lr_critic),
            opt_alpha=Adam(1, lr=cfg.lr_alpha),
            target_entropy=target_entropy,
        )

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))


def sac_update(buffer: ReplayBuffer, agent: SacAgent, cfg: SacConfig,
               rng: np.random.Generator) -> dict:
    """One gradient step for critics, actor and temperature, then polyak.

    Critic targets use the clipped double-Q value of a fresh next action with
    the entropy bonus; the actor step is fully reparameterized; the
    temperature moves log_alpha toward the target entropy.
    """
    obs, actions, rewards, next_obs, done = buffer.sample(cfg.batch_size, rng)
    n = obs.shape[0]
    alpha = agent.alpha
    policy, critics = agent.policy, agent.critics

    # --- critic targets
    next_actions, next_logp, _ = policy.sample_batch(next_obs, rng)
    xin_next = np.concatenate([next_obs, next_actions], axis=1)
    q1t = critics.t1.predict(xin_next)[:, 0]
    q2t = critics.t2.predict(xin_next)[:, 0]
    target_v = np.minimum(q1t, q2t) - alpha * next_logp
    y = rewards + cfg.discount * (1.0 - done) * target_v

    xin = np.concatenate([obs, actions], axis=1)
    losses = {}
    for name, critic, opt in (("q1", critics.q1, agent.opt_q1),
                              ("q2", critics.q2, agent.opt_q2)):
        q, acts = critic.forward(xin)
        diff = q[:, 0] - y
        losses[name] = float((diff * diff).mean())
        grads, _ = critic.backward(acts, (2.0 / n) * diff[:, None])
        opt.step(critic.params, grads)

    # --- actor (uses the freshly updated critics)
    new_actions, logp, cache = policy.sample_batch(obs, rng)
    _, clamp_mask, eps, sigma, tanh_u = cache
    xa = np.concatenate([obs, new_actions], axis=1)
    q1, acts1 = critics.q1.forward(xa)
    q2, acts2 = critics.q2.forward(xa)
    q_min = np.minimum(q1[:, 0], q2[:, 0])
    losses["actor"] = float((alpha * logp - q_min).mean())

    pick1 = (q1[:, 0] <= q2[:, 0]).astype(np.float32)[:, None]
    _, gin1 = critics.q1.backward(acts1, (-1.0 / n) * pick1)
    _, gin2 = critics.q2.backward(acts2, (-1.0 / n) * (1.0 - pick1))
    g_action = (gin1 + gin2)[:, policy.obs_dim :]  # dL/da, includes the 1/N

    # d logp / d mu = 2 tanh(u); d logp / d log_std = -1 + 2 sigma eps tanh(u)
    one_m_t2 = 1.0 - tanh_u * tanh_u
    da_dmu = policy.scales * one_m_t2
    g_mu = (alpha / n) * 2.0 * tanh_u + g_action * da_dmu
    g_ls = (alpha / n) * (-1.0 + 2.0 * sigma * eps * tanh_u) + g_action * da_dmu * sigma * eps
    grads_p = policy.backward_heads(cache, g_mu, g_ls)
    agent.opt_actor.step(policy.net.params, grads_p)

    # --- temperature: d/dlog_alpha of mean(-log_alpha * (logp + H_target))
    alpha_grad = -float((logp + agent.target_entropy).mean())
    agent.opt_alpha.step(agent.log_alpha, np.array([alpha_grad], dtype=np.float32))
    losses["alpha"] = agent.alpha
    losses["entropy"] = float(-logp.mean())

    critics.polyak_update(cfg.polyak)

    if not all(math.isfinite(v) for v in losses.values()):
        raise NonFiniteLoss(f"sac update diverged: {losses}")
    return losses
