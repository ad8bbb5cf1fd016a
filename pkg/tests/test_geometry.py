import math

import numpy as np
import pytest

from visracer import geometry, tracks
from visracer.errors import DegenerateSpec, OffTrackTooFar, SelfIntersectingEdges
from visracer.geometry import Pose, build_track, wrap_angle

from conftest import random_poses, random_track_points


# ---------------------------------------------------------------- oracles

def brute_force_project(track, p, subdiv=0.001):
    """Nearest centerline point via dense subdivision of every segment."""
    best = (np.inf, 0.0)
    for i in range(track.n):
        m = max(2, int(math.ceil(track.seg_len[i] / subdiv)) + 1)
        t = np.linspace(0.0, 1.0, m)
        pts = track.positions[i] + t[:, None] * track.seg_u[i]
        d = np.linalg.norm(pts - p, axis=1)
        j = int(np.argmin(d))
        if d[j] < best[0]:
            best = (float(d[j]), float(track.s[i] + t[j] * track.seg_len[i]))
    return best  # (distance, s)


def march_ray_distance(track, origin, direction, d_max, coarse=0.05, fine=0.001):
    """First exit through an edge by marching inside-tests along the ray."""

    def inside(ts):
        pts = origin[None, :] + ts[:, None] * direction[None, :]
        d = pts[:, None, :] - track.positions[None, :, :]
        t = (d[..., 0] * track.seg_u[:, 0] + d[..., 1] * track.seg_u[:, 1]) / track.seg_len2
        t = np.clip(t, 0.0, 1.0)
        ex = d[..., 0] - t * track.seg_u[:, 0]
        ey = d[..., 1] - t * track.seg_u[:, 1]
        dist = np.sqrt((ex * ex + ey * ey).min(axis=1))
        return dist <= 0.5 * track.width

    ts = np.arange(0.0, d_max + coarse, coarse)
    ins = inside(ts)
    outs = np.nonzero(~ins)[0]
    if outs.size == 0:
        return d_max
    k = int(outs[0])
    lo = ts[k - 1] if k > 0 else 0.0
    ts2 = np.arange(lo, ts[k] + fine, fine)
    ins2 = inside(ts2)
    outs2 = np.nonzero(~ins2)[0]
    return min(float(ts2[outs2[0]]), d_max) if outs2.size else d_max


def brute_force_edge_distance(track, p, subdiv=0.002):
    dists = []
    for poly in (track.left_edge, track.right_edge):
        u = np.roll(poly, -1, axis=0) - poly
        best = np.inf
        for i in range(poly.shape[0]):
            m = max(2, int(math.ceil(np.linalg.norm(u[i]) / subdiv)) + 1)
            t = np.linspace(0.0, 1.0, m)
            pts = poly[i] + t[:, None] * u[i]
            best = min(best, float(np.linalg.norm(pts - p, axis=1).min()))
        dists.append(best)
    return tuple(dists)


# ---------------------------------------------------------------- build

def test_circle_identity(circle_track):
    t = circle_track
    assert abs(t.length - 2 * math.pi * 50.0) < 1e-3 * t.length
    assert np.abs(t.curvature - 0.02).max() < 1e-4  # CCW circle: +1/R everywhere


def test_stadium_piecewise(stadium_track):
    t = stadium_track
    # bottom straight spans s in [0, 200]; stay clear of the cap joins
    straight = (t.s > 20.0) & (t.s < 180.0)
    assert np.abs(t.curvature[straight]).max() < 1e-3
    cap = (t.s > 210.0) & (t.s < 200.0 + math.pi * 30.0 - 10.0)
    assert np.abs(t.curvature[cap] - 1.0 / 30.0).max() < 1e-3


def test_edges_offset_by_half_width(chicane_track):
    t = chicane_track
    for poly, sign in ((t.left_edge, 1.0), (t.right_edge, -1.0)):
        off = poly - t.positions
        assert np.allclose(np.linalg.norm(off, axis=1), 0.5 * t.width, atol=1e-9)
        # perpendicular to the tangent, on the correct side
        along = np.einsum("ij,ij->i", off, t.tangents)
        assert np.abs(along).max() < 1e-9
        cross = t.tangents[:, 0] * off[:, 1] - t.tangents[:, 1] * off[:, 0]
        assert (sign * cross > 0).all()


def test_degenerate_specs():
    tri = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]])
    with pytest.raises(DegenerateSpec):
        build_track(geometry.TrackSpec(control_points=tri, width=6.0))
    sq = np.array([[0.0, 0.0], [50.0, 0.0], [50.0, 50.0], [0.0, 50.0]])
    with pytest.raises(DegenerateSpec):
        build_track(geometry.TrackSpec(control_points=sq, width=6.0, resample_step=0.0))
    with pytest.raises(DegenerateSpec):
        build_track(geometry.TrackSpec(control_points=sq, width=1.5))


def test_edge_fold_rejected():
    # radius 3 circle, width 10: |kappa| = 1/3 > 2/width
    with pytest.raises(SelfIntersectingEdges):
        build_track(tracks.circle_spec(radius=3.0, width=10.0))


def test_track_fold_rejected():
    # lemniscate: the loop crosses itself at the origin
    t = np.linspace(0.0, 2.0 * math.pi, 200, endpoint=False)
    pts = np.stack([60.0 * np.cos(t), 45.0 * np.sin(t) * np.cos(t)], axis=1)
    with pytest.raises(SelfIntersectingEdges):
        build_track(geometry.TrackSpec(control_points=pts, width=8.0))


# ---------------------------------------------------------------- projection

def test_project_trivial(circle_track):
    t = circle_track
    p, _ = t.point_at(42.0)
    s, lat = t.project(p)
    assert abs(lat) < 1e-9
    assert abs(t.progress_delta(42.0, s)) < 1e-6
    # concentric circles: query at radius 55 -> |lateral| = 5
    s, lat = t.project(np.array([55.0, 0.0]))
    assert abs(abs(lat) - 5.0) < 1e-3


def test_project_too_far(circle_track):
    with pytest.raises(OffTrackTooFar):
        circle_track.project(np.array([500.0, 500.0]))


def test_project_matches_brute_force(chicane_track):
    t = chicane_track
    rng = np.random.default_rng(7)
    pts, _, _ = random_track_points(t, 60, rng, lateral_span=0.5 * t.width + 0.9)
    for p in pts:
        s, lat = t.project(p)
        dist_o, s_o = brute_force_project(t, p)
        assert abs(abs(lat) - dist_o) < 1e-3
        assert abs(t.progress_delta(s_o, s)) < 2e-3


def test_reprojection_invariant(stadium_track):
    t = stadium_track
    rng = np.random.default_rng(8)
    pts, _, _ = random_track_points(t, 200, rng)
    for p in pts:
        s, _ = t.project(p)
        q, _ = t.point_at(s)
        _, lat2 = t.project(q)
        assert abs(lat2) < 1e-6


# ---------------------------------------------------------------- progress

def test_progress_delta_wraparound(circle_track):
    t = circle_track
    L = t.length
    assert abs(t.progress_delta(0.9 * L, 0.1 * L) - 0.2 * L) < 1e-9
    assert t.progress_delta(0.3 * L, 0.3 * L) == 0.0
    assert t.progress_delta(10.0, 9.5) == pytest.approx(-0.5, abs=1e-9)


def test_progress_delta_antisymmetric(chicane_track):
    t = chicane_track
    rng = np.random.default_rng(9)
    for _ in range(200):
        a, b = rng.uniform(0.0, t.length, 2)
        if abs(t.progress_delta(a, b)) < 0.5 * t.length - 1e-6:
            assert t.progress_delta(a, b) + t.progress_delta(b, a) == pytest.approx(0.0, abs=1e-9)


def test_lap_telescoping(stadium_track):
    t = stadium_track
    ss = np.linspace(0.0, t.length, 1500, endpoint=True) % t.length
    total = sum(t.progress_delta(a, b) for a, b in zip(ss[:-1], ss[1:]))
    assert abs(total - t.length) < 1e-6 * t.length


# ---------------------------------------------------------------- rays

def test_rays_on_straight(stadium_track):
    t = stadium_track
    pose = t.pose_at(100.0)  # mid bottom straight, aligned
    d = t.ray_edge_distances(pose, d_max=100.0)
    assert d.shape == (13,)
    assert d[0] == pytest.approx(0.5 * t.width, abs=1e-3)
    assert d[12] == pytest.approx(0.5 * t.width, abs=1e-3)
    assert d[6] == 100.0  # forward ray clamps on a long straight


def test_rays_match_marching_oracle(chicane_track):
    t = chicane_track
    rng = np.random.default_rng(10)
    d_max = 30.0
    for pose in random_poses(t, 12, rng):
        d = t.ray_edge_distances(pose, d_max=d_max)
        angles = pose.yaw - 0.5 * math.pi + np.arange(13) * math.radians(15.0)
        for i in (0, 3, 6, 9, 12):
            direction = np.array([math.cos(angles[i]), math.sin(angles[i])])
            ref = march_ray_distance(t, pose.position, direction, d_max)
            assert abs(d[i] - ref) < 5e-3


def test_rays_monotone_under_width(stadium_track):
    wide = build_track(tracks.stadium_spec(width=16.0))
    rng = np.random.default_rng(11)
    for pose in random_poses(stadium_track, 40, rng, lateral_span=4.0):
        d1 = stadium_track.ray_edge_distances(pose, d_max=60.0)
        d2 = wide.ray_edge_distances(pose, d_max=60.0)
        assert (d2 >= d1 - 1e-9).all()


# ---------------------------------------------------------------- edge minima

def test_min_edge_distances_centered(stadium_track):
    t = stadium_track
    d_l, d_r = t.min_edge_distances(t.pose_at(80.0))
    assert d_l == pytest.approx(6.0, abs=1e-6)
    assert d_r == pytest.approx(6.0, abs=1e-6)
    d_l, d_r = t.min_edge_distances(t.pose_at(80.0, lateral=+2.0))
    assert d_l == pytest.approx(4.0, abs=1e-6)
    assert d_r == pytest.approx(8.0, abs=1e-6)


def test_min_edge_matches_brute_force(chicane_track):
    t = chicane_track
    rng = np.random.default_rng(12)
    for pose in random_poses(t, 25, rng):
        d_l, d_r = t.min_edge_distances(pose)
        ref_l, ref_r = brute_force_edge_distance(t, pose.position)
        assert abs(d_l - ref_l) < 1e-3
        assert abs(d_r - ref_r) < 1e-3


def test_edge_sum_equals_width_on_straight(stadium_track):
    t = stadium_track
    rng = np.random.default_rng(13)
    for _ in range(50):
        lat = rng.uniform(-4.0, 4.0)
        pose = t.pose_at(rng.uniform(30.0, 170.0), lateral=lat)
        d_l, d_r = t.min_edge_distances(pose)
        assert d_l + d_r == pytest.approx(t.width, abs=1e-6)


# ---------------------------------------------------------------- heading

def test_heading_conventions(stadium_track):
    t = stadium_track
    assert t.heading_angle(t.pose_at(100.0)) == pytest.approx(0.0, abs=1e-9)
    backward = t.pose_at(100.0, heading_offset=math.pi)
    assert t.heading_angle(backward) == pytest.approx(math.pi)  # +pi, not -pi
    left = t.pose_at(100.0, heading_offset=0.5 * math.pi)
    assert t.heading_angle(left) == pytest.approx(0.5 * math.pi, abs=1e-9)


# ---------------------------------------------------------------- curvature lookahead

def test_curvature_lookahead_circle(circle_track):
    d = circle_track.curvature_lookahead(12.0, np.linspace(20.0, 60.0, 10))
    assert d.shape == (10,)
    assert np.abs(d - 0.02).max() < 1e-4


def test_curvature_lookahead_piecewise_and_wrap(stadium_track):
    t = stadium_track
    # from mid bottom straight, looking across the cap join at s = 200
    d = t.curvature_lookahead(150.0, np.linspace(20.0, 80.0, 10))
    assert abs(d[0]) < 1e-3  # 170 m: still straight
    assert d[-1] == pytest.approx(1.0 / 30.0, abs=1e-3)  # 230 m: inside the cap
    # wraparound equals direct lookup
    q = t.curvature_lookahead(t.length - 5.0, np.array([10.0]))
    assert q[0] == pytest.approx(float(t.curvature_at(5.0)), abs=1e-12)


def test_wrap_angle_conventions():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.3) == pytest.approx(0.3)
    assert wrap_angle(-0.3) == pytest.approx(-0.3)
