"""Seed extraction from raw template and search clouds.

A deliberately small permutation-invariant extractor: one set-abstraction
stage (shared MLP over KNN-grouped relative offsets, max-pooled), a global
max-pooled template summary, and a correlation layer that fuses each search
point's local feature with the template summary and a 9-dim box prior
(offset to the reference box center plus signed distances to its six faces).
Seeds are a farthest-point-sampled subset of the search points.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import Config
from .errors import DataError
from .geometry import Box3D, distance_matrix, farthest_point_sample, knn_sample
from .nn import MLPSpec, ParamStore, mlp_forward, mlp_forward_3d, register_mlp, relu_mlp

SA_PREFIX = "sa"
CORR_PREFIX = "correlate"


def _sa_spec(sa_dim: int) -> MLPSpec:
    return relu_mlp((3, sa_dim, sa_dim))


def _corr_spec(sa_dim: int, feat_dim: int) -> MLPSpec:
    return MLPSpec((2 * sa_dim + 9, feat_dim), ("none",), ("none",))


def register_backbone(store: ParamStore, cfg: Config) -> None:
    register_mlp(store, SA_PREFIX, _sa_spec(cfg.sa_dim))
    register_mlp(store, CORR_PREFIX, _corr_spec(cfg.sa_dim, cfg.feature_dim))


def local_point_features(tape: ad.Tape, store: ParamStore, coords: np.ndarray,
                         neighbors: int, sa_dim: int) -> ad.Node:
    """Per-point feature from KNN-grouped relative offsets, (N,) -> (N, sa)."""
    k = min(neighbors, coords.shape[0])
    nbrs = knn_sample(distance_matrix(coords), k)
    offsets = coords[nbrs] - coords[:, None, :]
    grouped = mlp_forward_3d(tape, store, SA_PREFIX, _sa_spec(sa_dim),
                             ad.constant(offsets))
    return ad.max_axis(tape, grouped, axis=1)


def box_prior(coords: np.ndarray, box: Box3D) -> np.ndarray:
    """(N, 9) box-aware cue: box-frame offset plus distances to the 6 faces."""
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    rel = coords - box.center
    bx = c * rel[:, 0] + s * rel[:, 1]
    by = c * rel[:, 1] - s * rel[:, 0]
    bz = rel[:, 2]
    hx, hy, hz = 0.5 * box.size
    return np.stack([bx, by, bz,
                     hx - bx, hx + bx,
                     hy - by, hy + by,
                     hz - bz, hz + bz], axis=1)


def lexicographic_start(coords: np.ndarray) -> int:
    """Index of the lexicographically smallest coordinate triple.

    Used as the FPS start so the chosen seed subset does not depend on the
    ordering of the input points.
    """
    return int(np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))[0])


def extract_seeds(tape: ad.Tape, store: ParamStore, cfg: Config,
                  template_coords: np.ndarray, search_coords: np.ndarray,
                  ref_box: Box3D):
    """Fuse template and search clouds into a seed set.

    Returns (seed_features (M, D) node, seed_coords (M, 3), seed_indices).
    Seed coordinates are always a subset of the search coordinates.
    """
    if search_coords.shape[0] < cfg.n_seeds:
        raise DataError(
            f"search cloud has {search_coords.shape[0]} points, "
            f"need at least {cfg.n_seeds}")
    template_local = local_point_features(tape, store, template_coords,
                                          cfg.sa_neighbors, cfg.sa_dim)
    template_summary = ad.max_axis(tape, template_local, axis=0)
    search_local = local_point_features(tape, store, search_coords,
                                        cfg.sa_neighbors, cfg.sa_dim)
    n_search = search_coords.shape[0]
    joint = ad.concat(tape, [
        search_local,
        ad.tile_rows(tape, template_summary, n_search),
        ad.constant(box_prior(search_coords, ref_box)),
    ], axis=1)
    fused = mlp_forward(tape, store, CORR_PREFIX,
                        _corr_spec(cfg.sa_dim, cfg.feature_dim), joint)
    idx = farthest_point_sample(search_coords, cfg.n_seeds,
                                start=lexicographic_start(search_coords))
    seed_features = ad.gather_rows(tape, fused, idx)
    return seed_features, search_coords[idx].copy(), idx
