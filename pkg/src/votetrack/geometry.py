"""Deterministic geometric kernels and the core spatial types.

Everything here is a pure function of its inputs. Distance sorts break ties
by ascending original index so results are reproducible and independent of
evaluation order; neighbor sets always include the anchor point itself
(distance zero sorts first).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

TWO_PI = 2.0 * np.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = (theta + np.pi) % TWO_PI - np.pi
    if wrapped <= -np.pi:
        wrapped += TWO_PI
    return float(wrapped)


def rotate_z(points: np.ndarray, angle: float) -> np.ndarray:
    """Rotate points (or a single 3-vector) about the up axis."""
    c, s = np.cos(angle), np.sin(angle)
    pts = np.asarray(points, dtype=np.float64)
    out = pts.copy()
    out[..., 0] = c * pts[..., 0] - s * pts[..., 1]
    out[..., 1] = s * pts[..., 0] + c * pts[..., 1]
    return out


def _as_coords(coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"coords must have shape (M, 3), got {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coords contain non-finite values")
    return arr


@dataclass(frozen=True)
class PointCloud:
    """A set of 3D points with optional per-point feature rows."""

    coords: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        coords = _as_coords(self.coords)
        object.__setattr__(self, "coords", coords)
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != coords.shape[0]:
                raise ValueError(
                    f"features must be (M, D) with M={coords.shape[0]}, got {feats.shape}"
                )
            if not np.all(np.isfinite(feats)):
                raise ValueError("features contain non-finite values")
            object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class Box3D:
    """An up-axis-rotated 3D box: center, (sx, sy, sz) extents, yaw.

    The first two size components span the ground plane, the third is
    vertical. Yaw is normalized to (-pi, pi] on construction.
    """

    center: np.ndarray
    size: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        size = np.asarray(self.size, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(size))):
            raise ValueError("box has non-finite entries")
        if np.any(size <= 0):
            raise ValueError(f"box size must be strictly positive, got {size}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def volume(self) -> float:
        return float(self.size[0] * self.size[1] * self.size[2])

    def ground_corners(self) -> np.ndarray:
        """The four ground-plane corners in CCW order, (4, 2)."""
        hx, hy = 0.5 * self.size[0], 0.5 * self.size[1]
        local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center[:2]

    def corners(self) -> np.ndarray:
        """All eight corners, (8, 3): bottom four then top four, CCW."""
        ground = self.ground_corners()
        hz = 0.5 * self.size[2]
        out = np.empty((8, 3))
        out[:4, :2] = ground
        out[:4, 2] = self.center[2] - hz
        out[4:, :2] = ground
        out[4:, 2] = self.center[2] + hz
        return out

    def inflated(self, margin: float) -> "Box3D":
        """Same pose, every extent grown by 2*margin."""
        return Box3D(self.center, self.size + 2.0 * margin, self.yaw)


def distance_matrix(coords) -> np.ndarray:
    """Symmetric matrix of pairwise Euclidean distances, zero diagonal."""
    return kernels.pairwise_distances(_as_coords(coords))


def sorted_neighbor_indices(dist: np.ndarray) -> np.ndarray:
    """Each row of `dist` argsorted ascending, ties by original index."""
    return np.argsort(dist, axis=1, kind="stable")


def sparse_sample(dist: np.ndarray, m: int) -> np.ndarray:
    """Stride-sample m neighbors per row from the distance-sorted order.

    Row i is the full ascending sort of dist[i] sliced at positions
    0, s, 2s, ..., (m-1)*s with stride s = floor(M/m); position 0 is always
    the anchor itself.
    """
    total = dist.shape[0]
    if not 1 <= m <= total:
        raise ValueError(f"m must be in [1, {total}], got {m}")
    stride = total // m
    order = sorted_neighbor_indices(dist)
    return np.ascontiguousarray(order[:, ::stride][:, :m])


def knn_sample(dist: np.ndarray, n: int) -> np.ndarray:
    """The n nearest neighbors per row, ascending, anchor first."""
    total = dist.shape[0]
    if not 1 <= n <= total:
        raise ValueError(f"n must be in [1, {total}], got {n}")
    order = sorted_neighbor_indices(dist)
    return np.ascontiguousarray(order[:, :n])


def farthest_point_sample(coords, count: int, start: int = 0) -> np.ndarray:
    """Greedy farthest point sampling; returns `count` distinct indices.

    The first pick is `start`; each later pick maximizes the minimum
    distance to the picked set, ties broken by smallest index.
    """
    arr = _as_coords(coords)
    m = arr.shape[0]
    if not 1 <= count <= m:
        raise ValueError(f"count must be in [1, {m}], got {count}")
    if not 0 <= start < m:
        raise ValueError(f"start must be in [0, {m}), got {start}")
    return kernels.farthest_point_indices(arr, count, start)


def points_in_box(coords, box: Box3D) -> np.ndarray:
    """Boundary-inclusive containment mask of shape (M,)."""
    arr = _as_coords(coords)
    return kernels.box_frame_mask(arr, box.center, box.size, box.yaw)


def box_iou_3d(a: Box3D, b: Box3D) -> float:
    """Volume IoU of two up-axis-rotated boxes, in [0, 1]."""
    inter_area = kernels.rect_intersection_area(a.ground_corners(), b.ground_corners())
    za0, za1 = a.center[2] - 0.5 * a.size[2], a.center[2] + 0.5 * a.size[2]
    zb0, zb1 = b.center[2] - 0.5 * b.size[2], b.center[2] + 0.5 * b.size[2]
    overlap_z = max(0.0, min(za1, zb1) - max(za0, zb0))
    inter = inter_area * overlap_z
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))
