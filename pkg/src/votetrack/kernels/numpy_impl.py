"""Pure-numpy implementations of the hot geometry kernels.

This is the fallback path used when numba is unavailable or disabled through
VOTETRACK_BACKEND=numpy, and the reference the numba twins are checked
against. Both backends must produce bitwise-identical results: keep the
per-element arithmetic (expression order included) in sync with
`numba_impl` when editing either side.
"""
import numpy as np


def pairwise_distances(coords):
    """All-pairs Euclidean distances, (M, 3) float64 -> (M, M)."""
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def farthest_point_indices(coords, count, start):
    """Greedy farthest point sampling over (M, 3) coords.

    The first pick is `start`; each later pick maximizes the minimum squared
    distance to the already-picked set. np.argmax returns the first maximum,
    so ties break toward the smallest index; picked entries are masked with
    -1 so duplicate coordinates degrade to plain index order.
    """
    m = coords.shape[0]
    picked = np.empty(count, dtype=np.int64)
    min_d2 = np.full(m, np.inf)
    picked[0] = start
    for t in range(1, count):
        delta = coords - coords[picked[t - 1]]
        d2 = (delta * delta).sum(axis=1)
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[picked[t - 1]] = -1.0
        picked[t] = int(np.argmax(min_d2))
    return picked


def box_frame_mask(coords, center, size, yaw):
    """Inclusive containment mask for an up-axis-rotated box, (M,) bool."""
    c = np.cos(yaw)
    s = np.sin(yaw)
    dx = coords[:, 0] - center[0]
    dy = coords[:, 1] - center[1]
    dz = coords[:, 2] - center[2]
    bx = c * dx + s * dy
    by = c * dy - s * dx
    return (
        (np.abs(bx) <= 0.5 * size[0])
        & (np.abs(by) <= 0.5 * size[1])
        & (np.abs(dz) <= 0.5 * size[2])
    )


def rect_intersection_area(subject, clip):
    """Intersection area of two convex quads given as (4, 2) CCW corners.

    Sutherland-Hodgman clipping followed by the shoelace formula. Written
    with plain loops and fixed-size buffers so the numba backend can compile
    this exact function.
    """
    cur = np.empty((16, 2))
    nxt = np.empty((16, 2))
    for i in range(4):
        cur[i, 0] = subject[i, 0]
        cur[i, 1] = subject[i, 1]
    n_cur = 4
    for k in range(4):
        if n_cur == 0:
            return 0.0
        cx1 = clip[k, 0]
        cy1 = clip[k, 1]
        k2 = k + 1 if k < 3 else 0
        cx2 = clip[k2, 0]
        cy2 = clip[k2, 1]
        ex = cx2 - cx1
        ey = cy2 - cy1
        n_nxt = 0
        sx = cur[n_cur - 1, 0]
        sy = cur[n_cur - 1, 1]
        s_in = ex * (sy - cy1) - ey * (sx - cx1) >= 0.0
        for j in range(n_cur):
            px = cur[j, 0]
            py = cur[j, 1]
            p_in = ex * (py - cy1) - ey * (px - cx1) >= 0.0
            if p_in != s_in:
                dx = px - sx
                dy = py - sy
                denom = ex * dy - ey * dx
                t = (ex * (cy1 - sy) - ey * (cx1 - sx)) / denom
                nxt[n_nxt, 0] = sx + t * dx
                nxt[n_nxt, 1] = sy + t * dy
                n_nxt += 1
            if p_in:
                nxt[n_nxt, 0] = px
                nxt[n_nxt, 1] = py
                n_nxt += 1
            sx = px
            sy = py
            s_in = p_in
        tmp = cur
        cur = nxt
        nxt = tmp
        n_cur = n_nxt
    if n_cur < 3:
        return 0.0
    area2 = 0.0
    for j in range(n_cur):
        j2 = j + 1 if j < n_cur - 1 else 0
        area2 += cur[j, 0] * cur[j2, 1] - cur[j2, 0] * cur[j, 1]
    return 0.5 * abs(area2)
