import numpy as np
import pytest

from visracer import geometry, tracks


@pytest.fixture(scope="session")
def circle_track():
    return geometry.build_track(tracks.circle_spec(radius=50.0, width=10.0))


@pytest.fixture(scope="session")
def stadium_track():
    return geometry.build_track(tracks.stadium_spec())


@pytest.fixture(scope="session")
def chicane_track():
    return geometry.build_track(tracks.stadium_chicane_spec())


def random_track_points(track, n, rng, lateral_span=None):
    """Random points near the track: (positions (n,2), s values, laterals)."""
    if lateral_span is None:
        lateral_span = 0.5 * track.width - 0.25
    s = rng.uniform(0.0, track.length, size=n)
    lat = rng.uniform(-lateral_span, lateral_span, size=n)
    pos, tan = track.point_at(s)
    normal = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
    return pos + lat[:, None] * normal, s, lat


def random_poses(track, n, rng, lateral_span=None, heading_span=0.4):
    pts, s, lat = random_track_points(track, n, rng, lateral_span)
    _, tan = track.point_at(s)
    yaw = np.arctan2(tan[:, 1], tan[:, 0]) + rng.uniform(-heading_span, heading_span, n)
    return [geometry.Pose(position=p, yaw=y) for p, y in zip(pts, yaw)]
