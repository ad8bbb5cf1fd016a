"""Bundled track specs and the JSON schema for track spec files."""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ConfigInvalid
from .geometry import TrackSpec

TRACK_FILE_VERSION = 1


def circle_spec(radius: float = 50.0, width: float = 10.0, resample_step: float = 0.5,
                spacing: float = 1.5) -> TrackSpec:
    """CCW circle; curvature is +1/radius everywhere."""
    n = max(12, int(round(2.0 * math.pi * radius / spacing)))
    ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    pts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return TrackSpec(control_points=pts, width=width, resample_step=resample_step,
                     name=f"circle-r{radius:g}")


def _arc_points(center, radius, a0, a1, spacing):
    n = max(3, int(math.ceil(abs(a1 - a0) * radius / spacing)))
    ang = np.linspace(a0, a1, n, endpoint=False)
    return center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _line_points(p0, p1, spacing):
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    n = max(2, int(math.ceil(np.linalg.norm(p1 - p0) / spacing)))
    t = np.linspace(0.0, 1.0, n, endpoint=False)[:, None]
    return p0 + t * (p1 - p0)


def stadium_spec(straight: float = 200.0, radius: float = 30.0, width: float = 12.0,
                 resample_step: float = 0.5, spacing: float = 2.0) -> TrackSpec:
    """Two straights joined by semicircular caps, traversed CCW.

    Arclength starts at the left end of the bottom straight (heading +x).
    """
    a = 0.5 * straight
    pts = np.vstack(
        [
            _line_points([-a, -radius], [a, -radius], spacing),
            _arc_points(np.array([a, 0.0]), radius, -0.5 * math.pi, 0.5 * math.pi, spacing),
            _line_points([a, radius], [-a, radius], spacing),
            _arc_points(np.array([-a, 0.0]), radius, 0.5 * math.pi, 1.5 * math.pi, spacing),
        ]
    )
    return TrackSpec(control_points=pts, width=width, resample_step=resample_step,
                     name=f"stadium-{straight:g}x{radius:g}")


def stadium_chicane_spec(straight: float = 140.0, radius: float = 25.0, width: float = 12.0,
                         offset: float = 6.0, ramp: float = 30.0,
                         resample_step: float = 0.5, spacing: float = 2.0) -> TrackSpec:
    """Stadium with an S-shaped chicane in the middle of the top straight.

    The chicane shifts the top straight inward by ``offset`` over ``ramp``
    meters on each side using a cosine blend, keeping curvature well below
    the edge-fold limit.
    """
    a = 0.5 * straight
    pts_bottom = _line_points([-a, -radius], [a, -radius], spacing)
    cap_right = _arc_points(np.array([a, 0.0]), radius, -0.5 * math.pi, 0.5 * math.pi, spacing)

    # top straight runs +x -> -x; chicane bump centered at x = 0
    xs = np.arange(a, -a, -spacing)
    half_len = ramp + 0.25 * ramp
    ys = np.full_like(xs, float(radius))
    for i, x in enumerate(xs):
        u = (x + half_len) / (2.0 * half_len)
        if 0.0 < u < 1.0:
            ys[i] = radius - offset * 0.5 * (1.0 - math.cos(2.0 * math.pi * u)) * 0.5 * (
                1.0 - math.cos(2.0 * math.pi * u)
            )
    pts_top = np.stack([xs, ys], axis=1)
    cap_left = _arc_points(np.array([-a, 0.0]), radius, 0.5 * math.pi, 1.5 * math.pi, spacing)

    pts = np.vstack([pts_bottom, cap_right, pts_top, cap_left])
    return TrackSpec(control_points=pts, width=width, resample_step=resample_step,
                     name=f"stadium-chicane-{straight:g}x{radius:g}")


BUILTIN_TRACKS = {
    "circle": circle_spec,
    "stadium": stadium_spec,
    "stadium_chicane": stadium_chicane_spec,
}


def builtin_spec(name: str, **kwargs) -> TrackSpec:
    if name not in BUILTIN_TRACKS:
        raise ConfigInvalid(f"unknown builtin track {name!r}; have {sorted(BUILTIN_TRACKS)}")
    return BUILTIN_TRACKS[name](**kwargs)


def spec_to_dict(spec: TrackSpec) -> dict:
    return {
        "format_version": TRACK_FILE_VERSION,
        "name": spec.name,
        "width": spec.width,
        "resample_step": spec.resample_step,
        "control_points": [[float(x), float(y)] for x, y in spec.control_points],
    }


def spec_from_dict(d: dict) -> TrackSpec:
    try:
        version = d.get("format_version", 1)
        if version != TRACK_FILE_VERSION:
            raise ConfigInvalid(f"unsupported track file version {version}")
        return TrackSpec(
            control_points=np.asarray(d["control_points"], dtype=np.float64),
            width=float(d["width"]),
            resample_step=float(d["resample_step"]),
            name=str(d.get("name", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad track spec file: {exc}") from exc


def save_spec(spec: TrackSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")


def load_spec(path) -> TrackSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))
