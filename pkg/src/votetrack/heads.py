"""Decoupled prediction head: separate MLPs for score, yaw, and center.

Each sub-head is a three-layer MLP over [vote feature; proposal center] rows;
the first two layers keep the width, the last aligns the output (1, 1, 3).
The heads share no parameters, so perturbing one cannot move the others.
`assemble_box` turns the best-scored proposal into the final box, copying the
size from the template (target size is constant over a sequence).

The per-proposal feature is a max-pool over the `vote_neighbors` nearest
votes (by vote coordinate); a single vote's feature cannot tell how close its
own vote landed, but the local vote consensus can. With vote_neighbors=1 the
nearest vote is the proposal's source vote itself, recovering a plain
[f^v; center] input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .geometry import Box3D
from .nn import MLPSpec, ParamStore, mlp_forward, register_mlp
from .voting import ProposalSet

HEAD_NAMES = ("head_score", "head_yaw", "head_center")
HEAD_WIDTHS = {"head_score": 1, "head_yaw": 1, "head_center": 3}


@dataclass(frozen=True)
class HeadOutput:
    scores: np.ndarray        # (K,), post-sigmoid in (0, 1)
    yaws: np.ndarray          # (K,), radians (raw regression)
    refinements: np.ndarray   # (K, 3), added to proposal centers


def head_spec(feat_dim: int, out_dim: int, norm: str = "layer") -> MLPSpec:
    width = feat_dim + 3
    return MLPSpec(
        widths=(width, width, width, out_dim),
        activations=("relu", "relu", "none"),
        norms=(norm, norm, "none"),
    )


def register_heads(store: ParamStore, feat_dim: int, norm: str = "layer") -> None:
    for name in HEAD_NAMES:
        register_mlp(store, name, head_spec(feat_dim, HEAD_WIDTHS[name], norm))


def predict(tape: ad.Tape, store: ParamStore, vote_features: ad.Node,
            vote_coords: ad.Node, proposals: ProposalSet, norm: str = "layer",
            vote_neighbors: int = 1):
    """Score, yaw and center-refinement nodes for each proposal.

    Returns (scores (K,), yaws (K,), refinements (K, 3), centers (K, 3)),
    where centers is the differentiable gather of the source votes. The
    per-proposal feature pools the `vote_neighbors` nearest votes; ties in
    the distance sort break by vote index.
    """
    feat_dim = vote_features.value.shape[1]
    idx = proposals.source_indices
    k = len(idx)
    vc = vote_coords.value
    count = min(vote_neighbors, vc.shape[0])
    diff = vc[None, :, :] - vc[idx][:, None, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :count]
    if count == 1:
        feats = ad.gather_rows(tape, vote_features, idx)
    else:
        feats = ad.max_axis(tape, ad.gather_rows(tape, vote_features, nearest),
                            axis=1)
    centers = ad.gather_rows(tape, vote_coords, idx)
    x = ad.concat(tape, [feats, centers], axis=1)

    score_raw = mlp_forward(tape, store, "head_score", head_spec(feat_dim, 1, norm), x)
    scores = ad.sigmoid(tape, ad.reshape(tape, score_raw, (k,)))
    yaw_raw = mlp_forward(tape, store, "head_yaw", head_spec(feat_dim, 1, norm), x)
    yaws = ad.reshape(tape, yaw_raw, (k,))
    refinements = mlp_forward(tape, store, "head_center", head_spec(feat_dim, 3, norm), x)
    return scores, yaws, refinements, centers


def assemble_box(out: HeadOutput, proposals: ProposalSet,
                 template_size: np.ndarray) -> Box3D:
    """Final box from the highest-scored proposal (ties -> lowest index)."""
    if len(proposals) < 1:
        raise ValueError("cannot assemble a box from an empty proposal set")
    best = int(np.argmax(out.scores))
    center = proposals.centers[best] + out.refinements[best]
    return Box3D(center=center, size=np.asarray(template_size, dtype=np.float64),
                 yaw=float(out.yaws[best]))
