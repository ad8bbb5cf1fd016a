# cython: language_level=3
"""Compiled hot-loop kernels. Must mirror numpy_impl exactly.

Accumulation orders match the NumPy fallback where results feed determinism
checks (classification is bit-identical; gradient reductions agree to float32
round-off).
"""

import numpy as np

cimport cython
from libc.math cimport floor, INFINITY

BACKEND = "cython"

CLASS_ROAD = 0
CLASS_WALL = 1
CLASS_OFFROAD = 2


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def classify_points(
    pts,
    origin,
    double cell_size,
    int ncols,
    int nrows,
    cell_class,
    cand_idx,
    seg_a,
    seg_u,
    seg_len2,
    double road_r2,
    double wall_r2,
):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[:, ::1] p = pts
    cdef double ox = origin[0]
    cdef double oy = origin[1]
    cdef signed char[::1] cls_cell = np.ascontiguousarray(cell_class, dtype=np.int8)
    cdef int[:, ::1] cand = np.ascontiguousarray(cand_idx, dtype=np.int32)
    cdef double[:, ::1] a = np.ascontiguousarray(seg_a, dtype=np.float64)
    cdef double[:, ::1] u = np.ascontiguousarray(seg_u, dtype=np.float64)
    cdef double[::1] l2 = np.ascontiguousarray(seg_len2, dtype=np.float64)

    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t kmax = cand.shape[1]
    out = np.full(n, CLASS_OFFROAD, dtype=np.uint8)
    cdef unsigned char[::1] o = out

    cdef Py_ssize_t i, j
    cdef long cx, cy, cell
    cdef int seg, cc
    cdef double x, y, dx, dy, t, ex, ey, d2, best
    for i in range(n):
        x = p[i, 0]
        y = p[i, 1]
        cx = <long>floor((x - ox) / cell_size)
        cy = <long>floor((y - oy) / cell_size)
        if cx < 0 or cx >= ncols or cy < 0 or cy >= nrows:
            continue  # outside the grid is guaranteed off-road
        cell = cy * ncols + cx
        cc = cls_cell[cell]
        if cc >= 0:
            o[i] = <unsigned char>cc
            continue
        best = INFINITY
        for j in range(kmax):
            seg = cand[cell, j]
            if seg < 0:
                break
            dx = x - a[seg, 0]
            dy = y - a[seg, 1]
            t = (dx * u[seg, 0] + dy * u[seg, 1]) / l2[seg]
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ex = dx - t * u[seg, 0]
            ey = dy - t * u[seg, 1]
            d2 = ex * ex + ey * ey
            if d2 < best:
                best = d2
        if best <= road_r2:
            o[i] = CLASS_ROAD
        elif best <= wall_r2:
            o[i] = CLASS_WALL
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def depthwise_forward(x_pad, weight, bias, int stride):
    x_pad = np.ascontiguousarray(x_pad, dtype=np.float32)
    cdef float[:, :, :, ::1] x = x_pad
    cdef float[:, :, ::1] w = np.ascontiguousarray(weight, dtype=np.float32)
    cdef float[::1] b = np.ascontiguousarray(bias, dtype=np.float32)

    cdef Py_ssize_t N = x.shape[0], Hp = x.shape[1], Wp = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t k = w.shape[1]
    cdef Py_ssize_t Ho = (Hp - k) // stride + 1
    cdef Py_ssize_t Wo = (Wp - k) // stride + 1
    y = np.empty((N, Ho, Wo, C), dtype=np.float32)
    cdef float[:, :, :, ::1] yv = y

    cdef Py_ssize_t n, oy, ox, ky, kx, c, iy, ix
    for n in range(N):
        for oy in range(Ho):
            for ox in range(Wo):
                for c in range(C):
                    yv[n, oy, ox, c] = b[c]
                for ky in range(k):
                    iy = oy * stride + ky
                    for kx in range(k):
                        ix = ox * stride + kx
                        for c in range(C):
                            yv[n, oy, ox, c] = yv[n, oy, ox, c] + x[n, iy, ix, c] * w[c, ky, kx]
    return y


@cython.boundscheck(False)
@cython.wraparound(False)
def depthwise_backward(x_pad, weight, grad_y, int stride):
    x_pad = np.ascontiguousarray(x_pad, dtype=np.float32)
    grad_y = np.ascontiguousarray(grad_y, dtype=np.float32)
    cdef float[:, :, :, ::1] x = x_pad
    cdef float[:, :, ::1] w = np.ascontiguousarray(weight, dtype=np.float32)
    cdef float[:, :, :, ::1] gy = grad_y

    cdef Py_ssize_t N = x.shape[0], Hp = x.shape[1], Wp = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t k = w.shape[1]
    cdef Py_ssize_t Ho = gy.shape[1], Wo = gy.shape[2]

    gx = np.zeros((N, Hp, Wp, C), dtype=np.float32)
    gw = np.zeros((C, k, k), dtype=np.float32)
    gb = np.zeros(C, dtype=np.float32)
    cdef float[:, :, :, ::1] gxv = gx
    cdef float[:, :, ::1] gwv = gw
    cdef float[::1] gbv = gb

    cdef Py_ssize_t n, oy, ox, ky, kx, c, iy, ix
    cdef float g
    for n in range(N):
        for oy in range(Ho):
            for ox in range(Wo):
                for c in range(C):
                    gbv[c] = gbv[c] + gy[n, oy, ox, c]
                for ky in range(k):
                    iy = oy * stride + ky
                    for kx in range(k):
                        ix = ox * stride + kx
                        for c in range(C):
                            g = gy[n, oy, ox, c]
                            gwv[c, ky, kx] = gwv[c, ky, kx] + x[n, iy, ix, c] * g
                            gxv[n, iy, ix, c] = gxv[n, iy, ix, c] + g * w[c, ky, kx]
    return gx, gw, gb
