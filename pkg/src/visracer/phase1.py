"""Phase 1: collect disrupted-driving image/target pairs, train the embedding.

The regression network is phi_reg(phi_rep(image)) -> 27 standardized targets;
phi_rep's 64-dim output is the embedding the driving policy consumes. The
epoch snapshot with the lowest evaluation error is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics, obs as obs_mod
from .baseline import DisruptionState, PursuitParams, disrupted_action, pursuit_action
from .dynamics import VehicleParams
from .errors import BaselineStuck, EmptyDataset, NonFiniteLoss
from .geometry import Track
from .nn import (
    Adam,
    Dense,
    DepthwiseSeparableConv,
    Flatten,
    Network,
    ReLU,
    SpaceToDepth,
    mse_loss,
)
from .obs import ENV_DIM, EMBED_DIM, Standardizer, env_observation, fit_standardizer
from .render import CameraSpec, render_view, frame_to_u8, u8_to_frame

# progress watchdog for the collection loop
_STUCK_WINDOW_S = 30.0
_STUCK_MIN_PROGRESS = 1.0  # m


@dataclass
class RegressionDataset:
    """Frame/target pairs captured at the same tick."""

    frames_u8: np.ndarray  # (M, H, W, C) uint8
    targets: np.ndarray  # (M, 27) float64, raw units
    ticks: np.ndarray  # (M,) int64
    camera: CameraSpec
    track_name: str = ""

    def __len__(self) -> int:
        return self.frames_u8.shape[0]

    def frames_f32(self, idx) -> np.ndarray:
        return u8_to_frame(self.frames_u8[idx])


@dataclass(frozen=True)
class Phase1Config:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 3e-4
    train_laps: int = 10
    eval_laps: int = 1
    seed: int = 0
    noise_steer: float = 0.18
    noise_throttle: float = 0.40
    noise_hold_ticks: int = 45

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("bad batch_size / learning_rate")


def collect_regression_dataset(track: Track, vehicle: VehicleParams,
                               pursuit: PursuitParams, camera: CameraSpec,
                               noise: DisruptionState | None, n_laps: float,
                               rng: np.random.Generator,
                               start_s: float = 0.0) -> RegressionDataset:
    """Drive the (optionally disrupted) baseline for n_laps, recording pairs.

    noise=None collects a clean run identical to the pure baseline. Wall
    contact is allowed; BaselineStuck is raised if the car stops progressing.
    """
    state = dynamics.initial_state(track.pose_at(start_s), speed=0.0)
    s, _ = track.project(state.pose.position)
    progress = 0.0
    goal = n_laps * track.length

    frames, targets, ticks = [], [], []
    window_ticks = int(_STUCK_WINDOW_S / dynamics.DT)
    progress_marks: list[float] = []
    tick = 0
    if noise is not None:
        noise.reset()
    while progress < goal:
        frame = render_view(track, state.pose, camera, timestamp=tick)
        target = env_observation(track, state)
        frames.append(frame_to_u8(frame.data))
        targets.append(target)
        ticks.append(tick)

        action = pursuit_action(track, state, pursuit, vehicle)
        if noise is not None:
            action = disrupted_action(action, noise, rng)
        state = dynamics.step(state, action, vehicle)
        state, _ = dynamics.resolve_walls(track, state, vehicle)
        s_new, _ = track.project(state.pose.position)
        progress += track.progress_delta(s, s_new)
        s = s_new
        tick += 1

        progress_marks.append(progress)
        if tick > window_ticks and progress - progress_marks[-window_ticks] < _STUCK_MIN_PROGRESS:
            raise BaselineStuck(f"no progress in {_STUCK_WINDOW_S:.0f} s at tick {tick}")

    return RegressionDataset(
        frames_u8=np.stack(frames),
        targets=np.stack(targets),
        ticks=np.asarray(ticks, dtype=np.int64),
        camera=camera,
        track_name=track.spec.name,
    )


def build_phi_rep(camera: CameraSpec, seed: int) -> Network:
    """Default embedding tower: space2depth then three strided separable convs."""
    h, w, c = camera.shape
    layers = [
        SpaceToDepth(2),
        DepthwiseSeparableConv(4 * c, 16, kernel=3, stride=2), ReLU(),
        DepthwiseSeparableConv(16, 32, kernel=3, stride=2), ReLU(),
        DepthwiseSeparableConv(32, 64, kernel=3, stride=2), ReLU(),
        Flatten(),
    ]
    probe = Network(layers, (h, w, c))
    flat_dim = probe.output_shape[0]
    layers.append(Dense(flat_dim, EMBED_DIM))
    return Network(layers, (h, w, c), rng_seed=seed)


def build_phi_reg(seed: int) -> Network:
    return Network([Dense(EMBED_DIM, ENV_DIM)], (EMBED_DIM,), rng_seed=seed)


@dataclass
class ReprNetwork:
    """Trained Phase-1 artifact: embedding tower, regression head, standardizer."""

    phi_rep: Network
    phi_reg: Network
    standardizer: Standardizer
    camera: CameraSpec
    history: list = field(default_factory=list)  # (epoch, train_loss, eval_mse)
    best_epoch: int = -1

    def embed(self, frame_data: np.ndarray) -> np.ndarray:
        """64-dim embedding of one frame (phi_rep only)."""
        x = frame_data[None].astype(np.float32, copy=False)
        return self.phi_rep.predict(x)[0]

    def predict_standardized(self, frames_f32: np.ndarray, batch: int = 256) -> np.ndarray:
        out = np.empty((frames_f32.shape[0], ENV_DIM), dtype=np.float32)
        for i in range(0, frames_f32.shape[0], batch):
            chunk = frames_f32[i : i + batch].astype(np.float32, copy=False)
            out[i : i + batch] = self.phi_reg.predict(self.phi_rep.predict(chunk))
        return out


def embed(net: ReprNetwork, frame_data: np.ndarray) -> np.ndarray:
    return net.embed(frame_data)


def _eval_mse(net_rep: Network, net_reg: Network, std: Standardizer,
              ds: RegressionDataset, batch: int = 256) -> float:
    """Mean per-element standardized squared error on a dataset."""
    z = std.apply(ds.targets).astype(np.float32)
    total = 0.0
    for i in range(0, len(ds), batch):
        x = ds.frames_f32(slice(i, i + batch))
        pred = net_reg.predict(net_rep.predict(x))
        d = pred - z[i : i + batch]
        total += float((d * d).sum())
    return total / (len(ds) * ENV_DIM)


def train_repr(train_ds: RegressionDataset, eval_ds: RegressionDataset,
               cfg: Phase1Config) -> ReprNetwork:
    """Minimize the standardized regression loss; keep the best-on-eval epoch."""
    cfg.validate()
    if len(train_ds) < 2:
        raise EmptyDataset("training dataset too small")
    standardizer = fit_standardizer(train_ds.targets)  # train targets only
    z_train = standardizer.apply(train_ds.targets).astype(np.float32)

    phi_rep = build_phi_rep(train_ds.camera, seed=cfg.seed)
    phi_reg = build_phi_reg(seed=cfg.seed + 1)
    opt_rep = Adam(phi_rep.num_params, lr=cfg.learning_rate)
    opt_reg = Adam(phi_reg.num_params, lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 2)

    best = (np.inf, None, None, -1)
    history = []
    n = len(train_ds)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            x = train_ds.frames_f32(idx)
            emb, acts_rep = phi_rep.forward(x)
            pred, acts_reg = phi_reg.forward(emb)
            loss, grad = mse_loss(pred, z_train[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"regression loss diverged at epoch {epoch}")
            g_reg, g_emb = phi_reg.backward(acts_reg, grad.astype(np.float32))
            g_rep, _ = phi_rep.backward(acts_rep, g_emb)
            opt_reg.step(phi_reg.params, g_reg)
            opt_rep.step(phi_rep.params, g_rep)
            epoch_loss += loss * len(idx)
        eval_mse = _eval_mse(phi_rep, phi_reg, standardizer, eval_ds)
        history.append((epoch, epoch_loss / n, eval_mse))
        if eval_mse < best[0]:
            best = (eval_mse, phi_rep.params.copy(), phi_reg.params.copy(), epoch)

    phi_rep.params[:] = best[1]
    phi_reg.params[:] = best[2]
    return ReprNetwork(
        phi_rep=phi_rep,
        phi_reg=phi_reg,
        standardizer=standardizer,
        camera=train_ds.camera,
        history=history,
        best_epoch=best[3],
    )


def mean_predictor_mse(standardizer: Standardizer, ds: RegressionDataset) -> float:
    """Standardized MSE of always predicting the training mean."""
    z = standardizer.apply(ds.targets)
    return float((z * z).mean())


def evaluate_regression(net: ReprNetwork, ds: RegressionDataset) -> dict:
    """Standardized MSE and raw-unit RMSE, overall and per target group."""
    if len(ds) == 0:
        raise EmptyDataset("empty evaluation dataset")
    z = net.standardizer.apply(ds.targets)
    pred_z = net.predict_standardized(ds.frames_f32(slice(None))).astype(np.float64)
    pred_raw = net.standardizer.invert(pred_z)

    out = {
        "mse_standardized": float(((pred_z - z) ** 2).mean()),
        "n_samples": len(ds),
        "groups": {},
    }
    for name, sl in obs_mod.TARGET_GROUPS.items():
        dz = pred_z[:, sl] - z[:, sl]
        dr = pred_raw[:, sl] - ds.targets[:, sl]
        out["groups"][name] = {
            "mse_standardized": float((dz * dz).mean()),
            "rmse_raw": float(np.sqrt((dr * dr).mean())),
        }
    return out
