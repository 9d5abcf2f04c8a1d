"""Seed enhancement: cascaded global/local vector-attention blocks.

Each block attends from every seed to a sampled neighborhood of seeds: the
global block stride-samples the distance-sorted order of the whole set (a
cheap long-range view), the local block uses plain nearest neighbors. The
attention weight is a per-channel vector (softmax over the neighbor axis,
independently per channel), computed from query-minus-key plus a relative
position encoding, and applied to value-plus-position. Block output is
layer_norm(FFN(attended) + input), keeping the input width.

An importance branch after the global block predicts, per seed, the
probability of lying on the target; it weights the offset loss in training.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .geometry import distance_matrix, knn_sample, sparse_sample
from .nn import MLPSpec, ParamStore, mlp_forward, mlp_forward_3d, register_mlp, relu_mlp


@dataclass(frozen=True)
class SeedSet:
    """Paired per-seed features (M, D) and coordinates (M, 3)."""

    features: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        coords = np.asarray(self.coords, dtype=np.float64)
        if feats.ndim != 2 or coords.ndim != 2 or coords.shape[1] != 3:
            raise ValueError("SeedSet needs (M, D) features and (M, 3) coords")
        if feats.shape[0] != coords.shape[0]:
            raise ValueError("features and coords row counts differ")
        if not (np.all(np.isfinite(feats)) and np.all(np.isfinite(coords))):
            raise ValueError("SeedSet entries must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return self.coords.shape[0]


def _single_linear(d_in: int, d_out: int) -> MLPSpec:
    return MLPSpec((d_in, d_out), ("none",), ("none",))


def register_attention_block(store: ParamStore, prefix: str, feat_dim: int,
                             attn_dim: int) -> None:
    register_mlp(store, f"{prefix}.pos", relu_mlp((3, attn_dim, attn_dim)))
    register_mlp(store, f"{prefix}.q", _single_linear(feat_dim, attn_dim))
    register_mlp(store, f"{prefix}.k", _single_linear(feat_dim, attn_dim))
    register_mlp(store, f"{prefix}.v", _single_linear(feat_dim, attn_dim))
    register_mlp(store, f"{prefix}.attn", relu_mlp((attn_dim, attn_dim, attn_dim)))
    register_mlp(store, f"{prefix}.ffn", _single_linear(attn_dim, feat_dim))
    store.register(f"{prefix}.norm_g", (feat_dim,), init="ones")
    store.register(f"{prefix}.norm_b", (feat_dim,), init="zeros")


def position_encoding(tape: ad.Tape, store: ParamStore, prefix: str,
                      coords: np.ndarray, neighbors: np.ndarray) -> ad.Node:
    """Encode anchor-to-neighbor offsets, (M, k, 3) -> (M, k, C).

    Offsets c_i - c_j depend only on relative geometry, so every block output
    is invariant to a rigid translation of the whole seed set.
    """
    offsets = coords[:, None, :] - coords[neighbors]
    spec = relu_mlp((3, store[f"{prefix}.pos.w0"].value.shape[1],
                     store[f"{prefix}.pos.w1"].value.shape[1]))
    return mlp_forward_3d(tape, store, f"{prefix}.pos", spec, ad.constant(offsets))


def vector_attention(tape: ad.Tape, store: ParamStore, prefix: str,
                     feats: ad.Node, neighbors: np.ndarray,
                     pos: ad.Node) -> ad.Node:
    """Per-channel attention over each seed's sampled neighborhood.

    feats: (M, D) node; neighbors: (M, k) indices; pos: (M, k, C) node.
    Returns the aggregated (M, C) features.
    """
    m, k = neighbors.shape
    feat_dim = feats.value.shape[1]
    attn_dim = store[f"{prefix}.q.w0"].value.shape[1]
    if feats.value.shape[0] != m:
        raise ValueError("feature rows and neighbor rows differ")

    lin = _single_linear(feat_dim, attn_dim)
    q = mlp_forward(tape, store, f"{prefix}.q", lin, feats)
    keys = ad.gather_rows(tape, mlp_forward(tape, store, f"{prefix}.k", lin, feats),
                          neighbors)
    values = ad.gather_rows(tape, mlp_forward(tape, store, f"{prefix}.v", lin, feats),
                            neighbors)

    pre = ad.add(tape, ad.sub(tape, ad.expand_mid(tape, q, k), keys), pos)
    logits = mlp_forward_3d(tape, store, f"{prefix}.attn",
                            relu_mlp((attn_dim, attn_dim, attn_dim)), pre)
    weights = ad.softmax(tape, logits, axis=1)
    return ad.sum_axis(tape, ad.mul(tape, weights, ad.add(tape, values, pos)), axis=1)


def attention_block(tape: ad.Tape, store: ParamStore, prefix: str,
                    feats: ad.Node, coords: np.ndarray,
                    neighbors: np.ndarray) -> ad.Node:
    """One full block: attention, FFN back to the input width, residual, norm."""
    feat_dim = feats.value.shape[1]
    attn_dim = store[f"{prefix}.q.w0"].value.shape[1]
    pos = position_encoding(tape, store, prefix, coords, neighbors)
    attended = vector_attention(tape, store, prefix, feats, neighbors, pos)
    ffn = mlp_forward(tape, store, f"{prefix}.ffn",
                      _single_linear(attn_dim, feat_dim), attended)
    residual = ad.add(tape, ffn, feats)
    return ad.layer_norm(tape, residual, store[f"{prefix}.norm_g"],
                         store[f"{prefix}.norm_b"])


def global_transformer_block(tape: ad.Tape, store: ParamStore, feats: ad.Node,
                             coords: np.ndarray, dist: np.ndarray, m: int,
                             prefix: str = "global") -> ad.Node:
    return attention_block(tape, store, prefix, feats, coords, sparse_sample(dist, m))


def local_transformer_block(tape: ad.Tape, store: ParamStore, feats: ad.Node,
                            coords: np.ndarray, dist: np.ndarray, n: int,
                            prefix: str = "local") -> ad.Node:
    return attention_block(tape, store, prefix, feats, coords, knn_sample(dist, n))


# ---------------------------------------------------------------------------
# importance branch


def importance_spec(feat_dim: int) -> MLPSpec:
    return relu_mlp((feat_dim, feat_dim, max(feat_dim // 2, 1), 1))


def register_importance_branch(store: ParamStore, feat_dim: int,
                               prefix: str = "importance") -> None:
    register_mlp(store, prefix, importance_spec(feat_dim))


def importance_branch(tape: ad.Tape, store: ParamStore, feats: ad.Node,
                      prefix: str = "importance") -> ad.Node:
    """Per-seed target-membership probability in (0, 1), shape (M,)."""
    feat_dim = feats.value.shape[1]
    raw = mlp_forward(tape, store, prefix, importance_spec(feat_dim), feats)
    return ad.sigmoid(tape, ad.reshape(tape, raw, (feats.value.shape[0],)))


# ---------------------------------------------------------------------------
# the cascaded module


def register_enhancer(store: ParamStore, feat_dim: int, attn_dim: int) -> None:
    """Register both attention blocks and the importance branch.

    All three are always registered, even when config switches disable them,
    so per-name seeded initialization keeps shared weights identical across
    ablation variants.
    """
    register_attention_block(store, "global", feat_dim, attn_dim)
    register_attention_block(store, "local", feat_dim, attn_dim)
    register_importance_branch(store, feat_dim)


def enhance_seeds(tape: ad.Tape, store: ParamStore, feats: ad.Node,
                  coords: np.ndarray, sparse_m: int, knn_n: int,
                  use_global: bool = True, use_local: bool = True,
                  use_importance: bool = True):
    """Run the cascade over one seed set.

    Returns (enhanced (M, D) node, importance (M,) node or None). Coordinates
    never change between the blocks, so one distance matrix is shared.
    Disabled blocks are identity pass-throughs.
    """
    dist = distance_matrix(coords)
    f_g = feats
    if use_global:
        f_g = global_transformer_block(tape, store, feats, coords, dist, sparse_m)
    imp = importance_branch(tape, store, f_g) if use_importance else None
    f_gl = f_g
    if use_local:
        f_gl = local_transformer_block(tape, store, f_g, coords, dist, knn_n)
    return f_gl, imp
