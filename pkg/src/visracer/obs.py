"""Observation vector assembly and target standardization.

EnvObservation layout (27 elements, fixed order):
  [0:13]  ray distances to the edges, frontal 180 degree fan
  [13]    min distance to the left edge
  [14]    min distance to the right edge
  [15]    signed lateral offset from the centerline (left positive)
  [16]    signed heading angle w.r.t. the centerline tangent
  [17:27] signed curvature at the 10 lookahead points

PolicyObservation = embedding (64) ++ dedicated features (11) = 75.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleState, dedicated_snapshot  # noqa: F401  (re-export site)
from .errors import DimensionMismatch, EmptyDataset
from .geometry import Track, default_lookahead_distances

ENV_DIM = 27
EMBED_DIM = 64
DEDICATED_DIM = 11
POLICY_DIM = EMBED_DIM + DEDICATED_DIM

RAY_SLICE = slice(0, 13)
EDGE_SLICE = slice(13, 15)
LATERAL_INDEX = 15
HEADING_INDEX = 16
CURVATURE_SLICE = slice(17, 27)

TARGET_GROUPS = {
    "rays": RAY_SLICE,
    "edges": EDGE_SLICE,
    "lateral": slice(15, 16),
    "heading": slice(16, 17),
    "curvature": CURVATURE_SLICE,
}

STD_FLOOR = 1e-8


def env_observation(track: Track, state: VehicleState, lookahead=None,
                    d_max: float = 100.0) -> np.ndarray:
    """The 27 regression targets at the current state (raw units)."""
    if lookahead is None:
        lookahead = default_lookahead_distances()
    pose = state.pose
    s, lateral = track.project(pose.position)
    out = np.empty(ENV_DIM, dtype=np.float64)
    out[RAY_SLICE] = track.ray_edge_distances(pose, d_max=d_max)
    out[EDGE_SLICE] = track.min_edge_distances(pose)
    out[LATERAL_INDEX] = lateral
    out[HEADING_INDEX] = track.heading_angle(pose)
    out[CURVATURE_SLICE] = track.curvature_lookahead(s, lookahead)
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-element mean/std of the training targets; std floored at 1e-8."""

    mean: np.ndarray  # (27,)
    std: np.ndarray  # (27,)

    def apply(self, targets: np.ndarray) -> np.ndarray:
        return (targets - self.mean) / self.std

    def invert(self, standardized: np.ndarray) -> np.ndarray:
        return standardized * self.std + self.mean


def fit_standardizer(targets: np.ndarray) -> Standardizer:
    """Fit mean/std over the full training set (population variance)."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2 or targets.shape[0] < 2:
        raise EmptyDataset("need at least 2 samples to fit a standardizer")
    mean = targets.mean(axis=0)
    std = np.maximum(targets.std(axis=0), STD_FLOOR)
    return Standardizer(mean=mean, std=std)


def assemble_policy_input(embedding: np.ndarray, dedicated: np.ndarray) -> np.ndarray:
    """Concatenate embedding (64) and dedicated features (11), embedding first."""
    embedding = np.asarray(embedding, dtype=np.float64).ravel()
    dedicated = np.asarray(dedicated, dtype=np.float64).ravel()
    if embedding.shape[0] != EMBED_DIM:
        raise DimensionMismatch(f"embedding must have {EMBED_DIM} elements, got {embedding.shape[0]}")
    if dedicated.shape[0] != DEDICATED_DIM:
        raise DimensionMismatch(f"dedicated must have {DEDICATED_DIM} elements, got {dedicated.shape[0]}")
    return np.concatenate([embedding, dedicated])
