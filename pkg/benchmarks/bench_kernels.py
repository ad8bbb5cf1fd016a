#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Times the two hot kernels (ground-pixel classification, depthwise conv
forward/backward) and the end-to-end per-tick pipeline (render + embed),
then prints a side-by-side table.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from visracer import geometry, kernels, tracks
from visracer.nn import Dense, DepthwiseSeparableConv, Flatten, Network, ReLU, SpaceToDepth
from visracer.render import CameraSpec, _camera_rig


def timeit(fn, repeats, warmup=3):
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def classify_args(track):
    g = track.grid
    return (
        g.origin, g.cell_size, g.ncols, g.nrows, g.cell_class, g.cand_idx,
        track.positions, track.seg_u, track.seg_len2,
        (0.5 * track.width) ** 2, (0.5 * track.width + geometry.WALL_BAND) ** 2,
    )


def bench_classify(track, impl, repeats):
    cam = CameraSpec()
    _, ground = _camera_rig(cam)
    pose = track.pose_at(42.0, lateral=1.0)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    world = np.stack(
        [
            pose.position[0] + ground[:, 0] * c - ground[:, 1] * s,
            pose.position[1] + ground[:, 0] * s + ground[:, 1] * c,
        ],
        axis=1,
    )
    args = classify_args(track)
    return timeit(lambda: impl.classify_points(world, *args), repeats)


def bench_depthwise(impl, repeats, batch=64):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, 50, 34, 16)).astype(np.float32)
    w = rng.normal(size=(16, 3, 3)).astype(np.float32)
    b = np.zeros(16, dtype=np.float32)
    fwd = timeit(lambda: impl.depthwise_forward(x, w, b, 2), repeats)
    ho, wo = (50 - 3) // 2 + 1, (34 - 3) // 2 + 1
    gy = rng.normal(size=(batch, ho, wo, 16)).astype(np.float32)
    bwd = timeit(lambda: impl.depthwise_backward(x, w, gy, 2), repeats)
    return fwd, bwd


def bench_tick(track, backend, repeats):
    """Render + embed one tick with the given backend forced."""
    import visracer.kernels as k

    saved = k._impl
    k._impl = k.get_impl(backend)
    try:
        from visracer.render import render_view

        cam = CameraSpec()
        tower = Network(
            [
                SpaceToDepth(2),
                DepthwiseSeparableConv(4, 16, 3, 2), ReLU(),
                DepthwiseSeparableConv(16, 32, 3, 2), ReLU(),
                DepthwiseSeparableConv(32, 64, 3, 2), ReLU(),
                Flatten(),
                Dense(64 * 6 * 4, 64),
            ],
            (64, 96, 1),
            rng_seed=0,
        )
        pose = track.pose_at(23.0, lateral=0.5)

        def tick():
            frame = render_view(track, pose, cam)
            tower.predict(frame.data[None].astype(np.float32))

        return timeit(tick, repeats)
    finally:
        k._impl = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    track = geometry.build_track(tracks.stadium_chicane_spec())
    backends = ["numpy"]
    try:
        kernels.get_impl("cython")
        backends.append("cython")
    except ImportError:
        print("compiled core not built; benchmarking numpy only")

    rows = []
    for name in backends:
        impl = kernels.get_impl(name)
        t_cls = bench_classify(track, impl, args.repeats)
        t_fwd, t_bwd = bench_depthwise(impl, args.repeats)
        t_tick = bench_tick(track, name, args.repeats)
        rows.append((name, t_cls, t_fwd, t_bwd, t_tick))

    print(f"{'backend':>8} {'classify/frame':>16} {'dwconv fwd b64':>16} "
          f"{'dwconv bwd b64':>16} {'render+embed':>14}")
    for name, t_cls, t_fwd, t_bwd, t_tick in rows:
        print(f"{name:>8} {t_cls * 1e3:13.3f} ms {t_fwd * 1e3:13.3f} ms "
              f"{t_bwd * 1e3:13.3f} ms {t_tick * 1e3:11.3f} ms")
    if len(rows) == 2:
        print("\nspeedup (numpy / cython):")
        for i, label in enumerate(["classify", "dw fwd", "dw bwd", "tick"], start=1):
            print(f"  {label:>9}: {rows[0][i] / rows[1][i]:5.1f}x")


if __name__ == "__main__":
    main()
