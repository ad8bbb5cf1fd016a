"""Closed-circuit track geometry and the queries behind the observation vector.

A track is a uniform-arclength closed polyline (resampled from a periodic
cubic spline through the control points) together with left/right edge
polylines offset by half the width. All queries are pure functions of the
immutable :class:`Track`, so concurrent readers are safe.

Conventions:
  * arclength s grows in control-point order, wraps at ``track.length``
  * curvature is signed, positive = turning left (CCW)
  * lateral offsets are signed, positive = left of the centerline tangent
  * angles are normalized to (-pi, pi]; exactly backward maps to +pi
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from . import kernels
from .errors import DegenerateSpec, OffTrack, OffTrackTooFar, SelfIntersectingEdges

TWO_PI = 2.0 * math.pi

# Track must fit the default vehicle body (half-width 1 m).
MIN_TRACK_WIDTH = 2.0
# Query ops reject poses more than this far outside the edges.
OFFTRACK_SLACK = 1.0
# Frontal 180 degree fan at 15 degree increments, both endpoints included.
RAY_COUNT = 13
RAY_STEP = math.radians(15.0)
DEFAULT_RAY_RANGE = 100.0
# Wall band rendered just outside each edge.
WALL_BAND = 0.5
# Cell size of the nearest-segment acceleration grid.
GRID_CELL = 1.0


def wrap_angle(a):
    """Normalize angle(s) to (-pi, pi]; the boundary maps to +pi."""
    r = np.mod(np.asarray(a, dtype=np.float64), TWO_PI)
    r = np.where(r > math.pi, r - TWO_PI, r)
    if np.ndim(a) == 0:
        return float(r)
    return r


@dataclass(frozen=True)
class TrackSpec:
    """Closed-loop track description: control points, width, resample step."""

    control_points: np.ndarray  # (n, 2) meters
    width: float
    resample_step: float = 0.5
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=np.float64)
        object.__setattr__(self, "control_points", pts)

    def validate(self) -> None:
        pts = self.control_points
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DegenerateSpec("control_points must have shape (n, 2)")
        if not np.isfinite(pts).all():
            raise DegenerateSpec("control_points must be finite")
        n = pts.shape[0]
        if n > 1 and np.allclose(pts[0], pts[-1], atol=1e-9):
            n -= 1  # explicit closure point
        if n < 4:
            raise DegenerateSpec(f"need at least 4 distinct control points, got {n}")
        if not (self.width > MIN_TRACK_WIDTH):
            raise DegenerateSpec(f"width must exceed {MIN_TRACK_WIDTH} m, got {self.width}")
        if not (self.resample_step > 0.0):
            raise DegenerateSpec("resample_step must be positive")


@dataclass(frozen=True)
class CenterlineSample:
    s: float
    position: np.ndarray  # (2,)
    tangent: np.ndarray  # (2,), unit norm
    curvature: float


@dataclass(frozen=True)
class Pose:
    """Planar pose; yaw is normalized on construction."""

    position: np.ndarray  # (2,)
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))


@dataclass(frozen=True)
class _DistanceGrid:
    """Per-cell candidate segments for exact nearest-centerline queries.

    Candidate lists provably contain the globally nearest segment for any
    query point inside the cell; cells whose class is decidable without a
    distance test carry it in ``cell_class`` (-1 = must test).
    """

    origin: np.ndarray  # (2,)
    cell_size: float
    ncols: int
    nrows: int
    cell_class: np.ndarray  # (ncols*nrows,) int8
    cand_idx: np.ndarray  # (ncols*nrows, K) int32, -1 padded


class Track:
    """Immutable resampled track; see module docstring for conventions."""

    def __init__(self, spec, s, positions, tangents, curvature, left_edge, right_edge):
        self.spec = spec
        self.width = float(spec.width)
        self.s = s
        self.positions = positions
        self.tangents = tangents
        self.curvature = curvature
        self.left_edge = left_edge
        self.right_edge = right_edge
        self.n = positions.shape[0]

        # closed-polyline segments i -> i+1 (mod n)
        nxt = np.roll(positions, -1, axis=0)
        self.seg_u = nxt - positions
        self.seg_len = np.linalg.norm(self.seg_u, axis=1)
        self.seg_len2 = np.einsum("ij,ij->i", self.seg_u, self.seg_u)
        self.length = float(self.seg_len.sum())

        self._edge_segs = {}
        for name, poly in (("left", left_edge), ("right", right_edge)):
            u = np.roll(poly, -1, axis=0) - poly
            self._edge_segs[name] = (poly, u, np.einsum("ij,ij->i", u, u))

        self.grid = _build_distance_grid(self)

    # -- basic interpolation ----------------------------------------------

    def wrap_s(self, s):
        return np.mod(s, self.length)

    def _locate(self, s):
        s = self.wrap_s(s)
        idx = np.searchsorted(self.s, s, side="right") - 1
        idx = np.clip(idx, 0, self.n - 1)
        frac = (s - self.s[idx]) / self.seg_len[idx]
        return idx, frac

    def point_at(self, s):
        """Centerline position and unit tangent at arclength s (wrapped)."""
        idx, frac = self._locate(s)
        pos = self.positions[idx] + np.expand_dims(frac, -1) * self.seg_u[idx]
        j = (idx + 1) % self.n
        tan = (1.0 - np.expand_dims(frac, -1)) * self.tangents[idx] + np.expand_dims(
            frac, -1
        ) * self.tangents[j]
        tan = tan / np.linalg.norm(tan, axis=-1, keepdims=True)
        return pos, tan

    def curvature_at(self, s):
        """Signed curvature at arclength s, linear periodic interpolation."""
        s = self.wrap_s(s)
        xs = np.concatenate([self.s, [self.length]])
        ks = np.concatenate([self.curvature, [self.curvature[0]]])
        return np.interp(s, xs, ks)

    def sample(self, i: int) -> CenterlineSample:
        return CenterlineSample(
            s=float(self.s[i]),
            position=self.positions[i].copy(),
            tangent=self.tangents[i].copy(),
            curvature=float(self.curvature[i]),
        )

    def pose_at(self, s: float, lateral: float = 0.0, heading_offset: float = 0.0) -> Pose:
        """Pose at (s, lateral) with yaw = tangent angle + heading_offset."""
        pos, tan = self.point_at(float(s))
        normal = np.array([-tan[1], tan[0]])
        yaw = math.atan2(tan[1], tan[0]) + heading_offset
        return Pose(position=pos + lateral * normal, yaw=yaw)

    # -- queries ------------------------------------------------------------

    def project(self, position) -> tuple[float, float]:
        """Project a point onto the centerline.

        Returns (s, lateral): arclength of the nearest centerline point and
        the signed perpendicular offset (positive = left of the tangent).
        Raises OffTrackTooFar beyond 2 x width.
        """
        p = np.asarray(position, dtype=np.float64)
        d = p - self.positions
        t = (d[:, 0] * self.seg_u[:, 0] + d[:, 1] * self.seg_u[:, 1]) / self.seg_len2
        t = np.clip(t, 0.0, 1.0)
        ex = d[:, 0] - t * self.seg_u[:, 0]
        ey = d[:, 1] - t * self.seg_u[:, 1]
        dist2 = ex * ex + ey * ey
        i = int(np.argmin(dist2))
        dist = math.sqrt(dist2[i])
        if dist > 2.0 * self.width:
            raise OffTrackTooFar(f"point {p} is {dist:.1f} m from the centerline")
        cross = self.seg_u[i, 0] * ey[i] - self.seg_u[i, 1] * ex[i]
        lateral = dist if cross > 0 else -dist
        s = self.s[i] + t[i] * self.seg_len[i]
        return float(self.wrap_s(s)), float(lateral)

    def progress_delta(self, s_prev: float, s_curr: float) -> float:
        """Wraparound-aware signed arclength advance, in (-L/2, L/2]."""
        d = math.fmod(s_curr - s_prev, self.length)
        if d < 0.0:
            d += self.length
        if d > 0.5 * self.length:
            d -= self.length
        return d

    def _require_on_track(self, pose: Pose) -> tuple[float, float]:
        s, lateral = self.project(pose.position)
        if abs(lateral) > 0.5 * self.width + OFFTRACK_SLACK:
            raise OffTrack(f"pose at lateral {lateral:.2f} m exceeds track half-width")
        return s, lateral

    def ray_edge_distances(self, pose: Pose, n_rays: int = RAY_COUNT, d_max: float = DEFAULT_RAY_RANGE):
        """First-hit distances to either edge along the frontal 180 degree fan.

        Ray i heads at yaw - 90deg + i*15deg for the default 13 rays; distances
        are clamped to d_max (also returned when a ray escapes the circuit).
        """
        self._require_on_track(pose)
        angles = pose.yaw - 0.5 * math.pi + np.arange(n_rays) * (math.pi / (n_rays - 1))
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        out = np.full(n_rays, d_max, dtype=np.float64)
        p = pose.position
        for poly, u, _len2 in self._edge_segs.values():
            ap = poly - p  # (n, 2)
            for i in range(n_rays):
                dx, dy = dirs[i]
                denom = dx * u[:, 1] - dy * u[:, 0]
                ok = np.abs(denom) > 1e-12
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = (ap[:, 0] * u[:, 1] - ap[:, 1] * u[:, 0]) / denom
                    r = (ap[:, 0] * dy - ap[:, 1] * dx) / denom
                hit = ok & (t >= 0.0) & (r >= 0.0) & (r <= 1.0)
                if hit.any():
                    out[i] = min(out[i], float(t[hit].min()))
        return np.minimum(out, d_max)

    def min_edge_distances(self, pose: Pose) -> tuple[float, float]:
        """Minimum Euclidean distance from the pose to each edge polyline."""
        self._require_on_track(pose)
        dists = {}
        p = pose.position
        for name, (poly, u, len2) in self._edge_segs.items():
            d = p - poly
            t = np.clip((d[:, 0] * u[:, 0] + d[:, 1] * u[:, 1]) / len2, 0.0, 1.0)
            ex = d[:, 0] - t * u[:, 0]
            ey = d[:, 1] - t * u[:, 1]
            dists[name] = float(np.sqrt(np.min(ex * ex + ey * ey)))
        return dists["left"], dists["right"]

    def heading_angle(self, pose: Pose) -> float:
        """Signed angle between vehicle heading and the centerline tangent."""
        s, _ = self._require_on_track(pose)
        _, tan = self.point_at(s)
        return wrap_angle(pose.yaw - math.atan2(tan[1], tan[0]))

    def curvature_lookahead(self, s: float, distances) -> np.ndarray:
        """Curvature sampled at wrapped arclengths s + d for each lookahead d."""
        d = np.asarray(distances, dtype=np.float64)
        return np.atleast_1d(self.curvature_at(s + d))


def default_lookahead_distances(d_near: float = 20.0, d_far: float = 60.0, n: int = 10):
    """Desk-scale lookahead points (scaled down from the source setup's 40-120 m)."""
    return np.linspace(d_near, d_far, n)


def build_track(spec: TrackSpec) -> Track:
    """Resample a spec into a uniform-arclength track with edges and curvature.

    Curvature comes from centered finite differences of the tangent angle.
    Raises DegenerateSpec / SelfIntersectingEdges on invalid geometry.
    """
    spec.validate()
    pts = spec.control_points
    if np.allclose(pts[0], pts[-1], atol=1e-9):
        pts = pts[:-1]

    closed = np.vstack([pts, pts[0]])
    chord = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    if (chord < 1e-9).any():
        raise DegenerateSpec("duplicate consecutive control points")
    t_knots = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(t_knots, closed, bc_type="periodic", axis=0)

    # dense arclength table, then uniform resampling
    n_dense = max(256, int(8 * t_knots[-1] / spec.resample_step))
    t_dense = np.linspace(0.0, t_knots[-1], n_dense + 1)
    p_dense = spline(t_dense)
    seg_dense = np.linalg.norm(np.diff(p_dense, axis=0), axis=1)
    s_dense = np.concatenate([[0.0], np.cumsum(seg_dense)])
    total = s_dense[-1]

    n = max(8, int(round(total / spec.resample_step)))
    s_targets = np.arange(n) * (total / n)
    t_samples = np.interp(s_targets, s_dense, t_dense)
    positions = spline(t_samples)

    seg = np.roll(positions, -1, axis=0) - positions
    seg_len = np.linalg.norm(seg, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg_len[:-1])])

    # centered differences on the closed polyline
    diffs = np.roll(positions, -1, axis=0) - np.roll(positions, 1, axis=0)
    tangents = diffs / np.linalg.norm(diffs, axis=1, keepdims=True)
    theta = np.arctan2(tangents[:, 1], tangents[:, 0])
    dtheta = wrap_angle(np.roll(theta, -1) - np.roll(theta, 1))
    span = seg_len + np.roll(seg_len, 1)
    curvature = dtheta / span

    kappa_max = float(np.abs(curvature).max())
    if kappa_max >= 2.0 / spec.width:
        raise SelfIntersectingEdges(
            f"max |curvature| {kappa_max:.4f} >= 2/width {2.0 / spec.width:.4f}; "
            "inner edge would fold"
        )

    # track folding onto itself: distant-in-arclength samples that are close in space
    tree = cKDTree(positions)
    pairs = tree.query_pairs(r=spec.width, output_type="ndarray")
    if len(pairs):
        length = float(seg_len.sum())
        arc = np.abs(s[pairs[:, 0]] - s[pairs[:, 1]])
        arc = np.minimum(arc, length - arc)
        if (arc > 4.0 * spec.width).any():
            raise SelfIntersectingEdges("track sections closer than one width apart")

    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    half = 0.5 * spec.width
    left_edge = positions + half * normals
    right_edge = positions - half * normals

    return Track(spec, s, positions, tangents, curvature, left_edge, right_edge)


def _build_distance_grid(track: Track) -> _DistanceGrid:
    """Precompute per-cell candidate segments and decidable cell classes."""
    cell = GRID_CELL
    half_diag = cell * math.sqrt(0.5)
    road_r = 0.5 * track.width
    wall_r = road_r + WALL_BAND

    pad = wall_r + 2.0 * cell + 1.0
    lo = track.positions.min(axis=0) - pad
    hi = track.positions.max(axis=0) + pad
    ncols = int(math.ceil((hi[0] - lo[0]) / cell))
    nrows = int(math.ceil((hi[1] - lo[1]) / cell))
    n_cells = ncols * nrows

    cxs = lo[0] + (np.arange(ncols) + 0.5) * cell
    cys = lo[1] + (np.arange(nrows) + 0.5) * cell
    centers = np.stack(np.meshgrid(cxs, cys), axis=-1).reshape(-1, 2)  # row-major by cy

    a = track.positions
    u = track.seg_u
    len2 = track.seg_len2

    cell_class = np.empty(n_cells, dtype=np.int8)
    cand_lists: list[np.ndarray] = []
    undecided: list[int] = []

    chunk = 4096
    for start in range(0, n_cells, chunk):
        m = centers[start : start + chunk]
        d = m[:, None, :] - a[None, :, :]
        t = np.clip((d[..., 0] * u[:, 0] + d[..., 1] * u[:, 1]) / len2, 0.0, 1.0)
        ex = d[..., 0] - t * u[:, 0]
        ey = d[..., 1] - t * u[:, 1]
        dist = np.sqrt(ex * ex + ey * ey)
        dmin = dist.min(axis=1)

        for j in range(m.shape[0]):
            idx = start + j
            d0 = dmin[j]
            if d0 - half_diag > wall_r:
                cell_class[idx] = kernels.CLASS_OFFROAD
            elif d0 + half_diag <= road_r:
                cell_class[idx] = kernels.CLASS_ROAD
            elif d0 - half_diag > road_r and d0 + half_diag <= wall_r:
                cell_class[idx] = kernels.CLASS_WALL
            else:
                cell_class[idx] = -1
                undecided.append(idx)
                cand_lists.append(
                    np.nonzero(dist[j] <= d0 + 2.0 * half_diag)[0].astype(np.int32)
                )

    k_max = max((len(c) for c in cand_lists), default=1)
    cand_idx = np.full((n_cells, k_max), -1, dtype=np.int32)
    for idx, cand in zip(undecided, cand_lists):
        cand_idx[idx, : len(cand)] = cand

    return _DistanceGrid(
        origin=lo,
        cell_size=cell,
        ncols=ncols,
        nrows=nrows,
        cell_class=cell_class,
        cand_idx=cand_idx,
    )


def classify_ground_points(track: Track, pts: np.ndarray) -> np.ndarray:
    """Class codes (road / wall band / off-road) for world-plane points."""
    g = track.grid
    return kernels.classify_points(
        pts,
        g.origin,
        g.cell_size,
        g.ncols,
        g.nrows,
        g.cell_class,
        g.cand_idx,
        track.positions,
        track.seg_u,
        track.seg_len2,
        (0.5 * track.width) ** 2,
        (0.5 * track.width + WALL_BAND) ** 2,
    )
