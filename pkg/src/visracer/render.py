"""Synthetic driver's-view rasterizer and the space-to-depth transform.

The camera is rigidly mounted to the vehicle (chase placement), so per-pixel
ground intersections are precomputed once per CameraSpec in the vehicle frame
and only rotated/translated per frame. Ground points are classified by exact
nearest-centerline distance (road / wall band / off-road); rays at or above
the horizon are sky. Flat shading, one fixed intensity per class, all values
exact multiples of 1/255 so frames survive uint8 round trips losslessly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IndivisibleShape, ShapeMismatch
from .geometry import Track, Pose, classify_ground_points
from . import kernels


@dataclass(frozen=True)
class CameraSpec:
    image_width: int = 96
    image_height: int = 64
    channels: int = 1
    horizontal_fov: float = math.radians(100.0)
    camera_height: float = 2.0  # m above ground
    camera_back: float = 4.0  # m behind the vehicle origin
    pitch: float = math.radians(10.0)  # downward positive
    near_clip: float = 0.5  # minimum forward ground distance

    def validate(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if not 0.0 < self.horizontal_fov < math.pi:
            raise ValueError("horizontal_fov must be in (0, pi)")
        if self.camera_height <= 0.0 or self.near_clip <= 0.0:
            raise ValueError("camera_height and near_clip must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.image_height, self.image_width, self.channels)


@dataclass(frozen=True)
class Frame:
    data: np.ndarray  # (H, W, C) float32 in [0, 1]
    timestamp: int  # simulation tick


# class -> 8-bit intensity; index order matches kernels.CLASS_* plus sky
CLASS_SKY = 3
_GRAY_LUT = np.array([90, 230, 40, 160], dtype=np.uint8)
_RGB_LUT = np.array(
    [[85, 85, 95], [235, 235, 235], [45, 75, 40], [140, 170, 235]], dtype=np.uint8
)


@lru_cache(maxsize=8)
def _camera_rig(camera: CameraSpec):
    """Per-pixel ground intersections in the vehicle frame (pose-independent).

    Returns (sky_mask flat bool, ground_xy (P, 2) float64 for non-sky pixels).
    Vehicle frame: x forward, y left, z up; camera at (-camera_back, 0, height),
    pitched down, image x axis to the right (-y), f dot dir == 1 for all rays.
    """
    camera.validate()
    w, h = camera.image_width, camera.image_height
    focal = (w / 2.0) / math.tan(camera.horizontal_fov / 2.0)
    cols = (np.arange(w) + 0.5 - w / 2.0) / focal
    rows = -(np.arange(h) + 0.5 - h / 2.0) / focal
    xc, yc = np.meshgrid(cols, rows)  # (h, w)

    p = camera.pitch
    fwd = np.array([math.cos(p), 0.0, -math.sin(p)])
    right = np.array([0.0, -1.0, 0.0])
    up = np.array([math.sin(p), 0.0, math.cos(p)])

    d = (
        fwd[None, None, :]
        + xc[..., None] * right[None, None, :]
        + yc[..., None] * up[None, None, :]
    )
    dz = d[..., 2].ravel()
    sky = dz >= -1e-12

    t = np.empty_like(dz)
    t[sky] = np.nan
    t[~sky] = camera.camera_height / -dz[~sky]
    # forward camera distance equals t (f.dir == 1); clamp to the near plane
    t = np.maximum(t, camera.near_clip)

    gx = -camera.camera_back + t * d[..., 0].ravel()
    gy = t * d[..., 1].ravel()
    ground_xy = np.stack([gx[~sky], gy[~sky]], axis=1)
    return sky, ground_xy


def horizon_row(camera: CameraSpec) -> int:
    """First image row that can contain ground (rows above are pure sky)."""
    sky, _ = _camera_rig(camera)
    rows = (~sky.reshape(camera.image_height, camera.image_width)).any(axis=1)
    idx = np.nonzero(rows)[0]
    return int(idx[0]) if idx.size else camera.image_height


def render_view(track: Track, pose: Pose, camera: CameraSpec, timestamp: int = 0) -> Frame:
    """Rasterize the driver's view at the given pose. Pure and deterministic."""
    sky, ground_xy = _camera_rig(camera)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    px, py = pose.position
    world = np.empty_like(ground_xy)
    world[:, 0] = px + ground_xy[:, 0] * c - ground_xy[:, 1] * s
    world[:, 1] = py + ground_xy[:, 0] * s + ground_xy[:, 1] * c

    classes = np.full(sky.shape[0], CLASS_SKY, dtype=np.uint8)
    classes[~sky] = classify_ground_points(track, world)

    lut = _GRAY_LUT if camera.channels == 1 else _RGB_LUT
    img = lut[classes].astype(np.float32) / 255.0
    img = img.reshape(camera.image_height, camera.image_width, camera.channels)
    return Frame(data=img, timestamp=timestamp)


def space_to_depth(x: np.ndarray, block: int) -> np.ndarray:
    """Lossless block rearrangement (H, W, C) -> (H/b, W/b, C*b*b).

    out[..., y, x, c*b*b + dy*b + dx] == in[..., y*b + dy, x*b + dx, c].
    Accepts leading batch dimensions.
    """
    if block < 1:
        raise IndivisibleShape("block must be >= 1")
    if x.ndim < 3:
        raise ShapeMismatch("expected at least (H, W, C)")
    lead = x.shape[:-3]
    h, w, c = x.shape[-3:]
    if h % block or w % block:
        raise IndivisibleShape(f"block {block} does not divide {h}x{w}")
    b = block
    y = x.reshape(*lead, h // b, b, w // b, b, c)
    y = np.moveaxis(y, (-4, -2), (-2, -1))  # (..., H/b, W/b, C, b, b)
    return np.ascontiguousarray(y).reshape(*lead, h // b, w // b, c * b * b)


def depth_to_space(x: np.ndarray, block: int) -> np.ndarray:
    """Inverse of :func:`space_to_depth`."""
    if block < 1:
        raise IndivisibleShape("block must be >= 1")
    lead = x.shape[:-3]
    h, w, cbb = x.shape[-3:]
    b = block
    if cbb % (b * b):
        raise IndivisibleShape(f"channel dim {cbb} not divisible by block^2")
    c = cbb // (b * b)
    y = x.reshape(*lead, h, w, c, b, b)
    y = np.moveaxis(y, (-2, -1), (-4, -2))  # (..., H, b, W, b, C)
    return np.ascontiguousarray(y).reshape(*lead, h * b, w * b, c)


def frame_to_u8(frame_data: np.ndarray) -> np.ndarray:
    """Quantize [0,1] floats to uint8; exact for the flat-shaded class LUT."""
    return np.round(frame_data * 255.0).astype(np.uint8)


def u8_to_frame(data: np.ndarray) -> np.ndarray:
    return data.astype(np.float32) / 255.0


def write_pnm(path, frame_data: np.ndarray) -> None:
    """Dump a frame as binary PGM (1 channel) or PPM (3 channels)."""
    arr = frame_to_u8(frame_data)
    h, w, c = arr.shape
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())
