"""NumPy fallback implementations of the hot-loop kernels.

Both backends must be drop-in interchangeable: same signatures, same float64
point/segment arithmetic (the compiled core is built with FMA contraction
disabled so classification results match bit for bit).
"""

import numpy as np

BACKEND = "numpy"

# class codes shared with the renderer
CLASS_ROAD = 0
CLASS_WALL = 1
CLASS_OFFROAD = 2


def classify_points(
    pts,
    origin,
    cell_size,
    ncols,
    nrows,
    cell_class,
    cand_idx,
    seg_a,
    seg_u,
    seg_len2,
    road_r2,
    wall_r2,
):
    """Classify world-plane points as road / wall band / off-road.

    Exact nearest-segment distances are computed against the centerline
    polyline, restricted to the per-cell candidate lists which are built to
    provably contain the global argmin for any query inside the cell.

    pts: (P, 2) float64. Returns (P,) uint8 class codes.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = pts.shape[0]
    out = np.full(n, CLASS_OFFROAD, dtype=np.uint8)
    if n == 0:
        return out

    cx = np.floor((pts[:, 0] - origin[0]) / cell_size).astype(np.int64)
    cy = np.floor((pts[:, 1] - origin[1]) / cell_size).astype(np.int64)
    inside = (cx >= 0) & (cx < ncols) & (cy >= 0) & (cy < nrows)
    if not inside.any():
        return out

    cells = cy[inside] * ncols + cx[inside]
    decided = cell_class[cells]
    sub = np.where(decided >= 0, decided.astype(np.uint8), np.uint8(0))

    todo = decided < 0
    if todo.any():
        p = pts[inside][todo]
        cand = cand_idx[cells[todo]]  # (m, K), -1 padded
        valid = cand >= 0
        safe = np.where(valid, cand, 0)
        a = seg_a[safe]  # (m, K, 2)
        u = seg_u[safe]
        l2 = seg_len2[safe]
        d = p[:, None, :] - a
        t = (d[..., 0] * u[..., 0] + d[..., 1] * u[..., 1]) / l2
        t = np.clip(t, 0.0, 1.0)
        ex = d[..., 0] - t * u[..., 0]
        ey = d[..., 1] - t * u[..., 1]
        dist2 = ex * ex + ey * ey
        dist2[~valid] = np.inf
        best = dist2.min(axis=1)
        cls = np.full(best.shape, CLASS_OFFROAD, dtype=np.uint8)
        cls[best <= wall_r2] = CLASS_WALL
        cls[best <= road_r2] = CLASS_ROAD
        sub[todo] = cls

    out[inside] = sub
    return out


def depthwise_forward(x_pad, weight, bias, stride):
    """Depthwise k x k convolution on NHWC input (already padded).

    x_pad: (N, Hp, Wp, C) float32; weight: (C, k, k); bias: (C,).
    Returns (N, Ho, Wo, C).
    """
    n, hp, wp, c = x_pad.shape
    k = weight.shape[1]
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    y = np.empty((n, ho, wo, c), dtype=x_pad.dtype)
    y[:] = bias
    for ky in range(k):
        for kx in range(k):
            xs = x_pad[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride, :]
            y += xs * weight[:, ky, kx]
    return y


def depthwise_backward(x_pad, weight, grad_y, stride):
    """Gradients of depthwise_forward.

    Returns (grad_x_pad, grad_weight, grad_bias).
    """
    n, hp, wp, c = x_pad.shape
    k = weight.shape[1]
    ho, wo = grad_y.shape[1], grad_y.shape[2]
    gx = np.zeros_like(x_pad)
    gw = np.zeros_like(weight)
    gb = grad_y.sum(axis=(0, 1, 2))
    for ky in range(k):
        for kx in range(k):
            xs = x_pad[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride, :]
            gw[:, ky, kx] = (xs * grad_y).sum(axis=(0, 1, 2))
            gx[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride, :] += (
                grad_y * weight[:, ky, kx]
            )
    return gx, gw, gb
