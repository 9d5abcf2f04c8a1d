"""Numba-compiled twins of the hot geometry kernels.

Per-element arithmetic mirrors `numpy_impl` exactly so that both backends
return bitwise-identical arrays; `benchmarks/bench_kernels.py` asserts this.
"""
import numpy as np
from numba import njit

from . import numpy_impl


@njit(cache=True)
def pairwise_distances(coords):
    m = coords.shape[0]
    out = np.empty((m, m), dtype=np.float64)
    for i in range(m):
        out[i, i] = 0.0
        for j in range(i + 1, m):
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            dz = coords[i, 2] - coords[j, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            out[i, j] = d
            out[j, i] = d
    return out


@njit(cache=True)
def farthest_point_indices(coords, count, start):
    m = coords.shape[0]
    picked = np.empty(count, dtype=np.int64)
    min_d2 = np.full(m, np.inf)
    picked[0] = start
    for t in range(1, count):
        prev = picked[t - 1]
        for j in range(m):
            dx = coords[j, 0] - coords[prev, 0]
            dy = coords[j, 1] - coords[prev, 1]
            dz = coords[j, 2] - coords[prev, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < min_d2[j]:
                min_d2[j] = d2
        min_d2[prev] = -1.0
        best = 0
        best_val = -np.inf
        for j in range(m):
            if min_d2[j] > best_val:
                best_val = min_d2[j]
                best = j
        picked[t] = best
    return picked


@njit(cache=True)
def box_frame_mask(coords, center, size, yaw):
    m = coords.shape[0]
    c = np.cos(yaw)
    s = np.sin(yaw)
    hx = 0.5 * size[0]
    hy = 0.5 * size[1]
    hz = 0.5 * size[2]
    out = np.empty(m, dtype=np.bool_)
    for i in range(m):
        dx = coords[i, 0] - center[0]
        dy = coords[i, 1] - center[1]
        dz = coords[i, 2] - center[2]
        bx = c * dx + s * dy
        by = c * dy - s * dx
        out[i] = (np.abs(bx) <= hx) and (np.abs(by) <= hy) and (np.abs(dz) <= hz)
    return out


rect_intersection_area = njit(cache=True)(numpy_impl.rect_intersection_area)
