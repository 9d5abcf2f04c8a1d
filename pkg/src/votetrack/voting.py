"""Offset learning: seeds vote for the target center, proposals are sampled.

The voting MLP consumes [enhanced feature; raw coordinate] rows and outputs
same-width residuals; splitting the output gives a feature delta and a 3D
coordinate offset, both added back onto the inputs. Proposal centers are a
farthest-point-sampled subset of the vote coordinates (no interpolation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .geometry import farthest_point_sample
from .nn import MLPSpec, ParamStore, mlp_forward, register_mlp

VOTE_PREFIX = "vote"


@dataclass(frozen=True)
class VoteSet:
    """Per-seed votes: features f^v, coordinates c^v, and the raw offsets."""

    features: np.ndarray     # (M, D)
    coords: np.ndarray       # (M, 3)
    offsets: np.ndarray      # (M, 3), coords == seed_coords + offsets exactly

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class ProposalSet:
    """K candidate centers with their source rows in the vote set."""

    centers: np.ndarray          # (K, 3)
    source_indices: np.ndarray   # (K,), distinct

    def __post_init__(self):
        if len(set(self.source_indices.tolist())) != len(self.source_indices):
            raise ValueError("proposal source indices must be distinct")

    def __len__(self) -> int:
        return self.centers.shape[0]


def voting_spec(feat_dim: int, norm: str = "layer") -> MLPSpec:
    width = feat_dim + 3
    return MLPSpec(
        widths=(width, width, width, width),
        activations=("relu", "relu", "none"),
        norms=(norm, norm, "none"),
    )


def register_voting(store: ParamStore, feat_dim: int, norm: str = "layer") -> None:
    register_mlp(store, VOTE_PREFIX, voting_spec(feat_dim, norm))


def vote(tape: ad.Tape, store: ParamStore, enhanced: ad.Node, coords: np.ndarray,
         norm: str = "layer"):
    """Compute votes from enhanced seed features.

    Returns (vote_features (M, D) node, vote_coords (M, 3) node,
    offsets (M, 3) node).
    """
    m, feat_dim = enhanced.value.shape
    if coords.shape != (m, 3):
        raise ValueError(f"coords must be ({m}, 3), got {coords.shape}")
    stacked = ad.concat(tape, [enhanced, ad.constant(coords)], axis=1)
    delta = mlp_forward(tape, store, VOTE_PREFIX, voting_spec(feat_dim, norm), stacked)
    d_feat = ad.slice_cols(tape, delta, 0, feat_dim)
    d_coord = ad.slice_cols(tape, delta, feat_dim, feat_dim + 3)
    vote_feats = ad.add(tape, enhanced, d_feat)
    vote_coords = ad.add_const(tape, d_coord, coords)
    return vote_feats, vote_coords, d_coord


def select_proposals(vote_coords: np.ndarray, count: int, start: int = 0) -> ProposalSet:
    """Farthest-point-sample `count` proposals from the vote coordinates."""
    total = vote_coords.shape[0]
    if count >= total:
        raise ValueError(f"proposal count must be < {total}, got {count}")
    idx = farthest_point_sample(vote_coords, count, start=start)
    return ProposalSet(centers=vote_coords[idx].copy(), source_indices=idx)
