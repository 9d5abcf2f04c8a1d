"""End-to-end model: backbone -> attention cascade -> voting -> heads.

One `forward` is shared by training, tracking and the gradient audits; all
component switches (ablations) are honored here. Parameters for disabled
components are still registered so initial weights stay comparable across
variants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .attention import enhance_seeds, register_enhancer
from .backbone import extract_seeds, register_backbone
from .config import Config
from .geometry import Box3D
from .heads import HeadOutput, predict, register_heads
from .losses import (LossWeights, TrainingTarget, loss_center_rot,
                     loss_importance, loss_offset, loss_score, loss_total)
from .nn import ParamStore
from .voting import ProposalSet, VoteSet, register_voting, select_proposals, vote


def _norm_kind(cfg: Config) -> str:
    return "batch" if cfg.use_batch_norm else "layer"


def register_model(store: ParamStore, cfg: Config) -> None:
    register_backbone(store, cfg)
    register_enhancer(store, cfg.feature_dim, cfg.attn_dim)
    register_voting(store, cfg.feature_dim, norm=_norm_kind(cfg))
    register_heads(store, cfg.feature_dim, norm=_norm_kind(cfg))


def build_model(cfg: Config) -> ParamStore:
    store = ParamStore(seed=cfg.seed)
    register_model(store, cfg)
    return store


@dataclass
class ForwardResult:
    """Every intermediate a caller might need, nodes and routing included."""

    seed_features: ad.Node       # (M, D)
    seed_coords: np.ndarray      # (M, 3)
    seed_indices: np.ndarray     # (M,) rows into the search cloud
    enhanced: ad.Node            # (M, D)
    importance: ad.Node | None   # (M,) in (0, 1), None when disabled
    vote_features: ad.Node       # (M, D)
    vote_coords: ad.Node         # (M, 3)
    vote_offsets: ad.Node        # (M, 3)
    proposals: ProposalSet
    scores: ad.Node              # (K,)
    yaws: ad.Node                # (K,)
    refinements: ad.Node         # (K, 3)
    proposal_centers: ad.Node    # (K, 3)

    def head_output(self) -> HeadOutput:
        return HeadOutput(scores=self.scores.value.copy(),
                          yaws=self.yaws.value.copy(),
                          refinements=self.refinements.value.copy())

    def vote_set(self) -> VoteSet:
        return VoteSet(features=self.vote_features.value.copy(),
                       coords=self.vote_coords.value.copy(),
                       offsets=self.vote_offsets.value.copy())


def forward(tape: ad.Tape, store: ParamStore, cfg: Config,
            template_coords: np.ndarray, search_coords: np.ndarray,
            ref_box: Box3D) -> ForwardResult:
    seed_features, seed_coords, seed_idx = extract_seeds(
        tape, store, cfg, template_coords, search_coords, ref_box)
    enhanced, importance = enhance_seeds(
        tape, store, seed_features, seed_coords,
        sparse_m=cfg.sparse_samples, knn_n=cfg.knn_samples,
        use_global=cfg.use_global, use_local=cfg.use_local,
        use_importance=cfg.use_importance)
    vote_features, vote_coords, vote_offsets = vote(
        tape, store, enhanced, seed_coords, norm=_norm_kind(cfg))
    proposals = select_proposals(vote_coords.value, cfg.n_proposals,
                                 start=cfg.fps_start)
    scores, yaws, refinements, centers = predict(
        tape, store, vote_features, vote_coords, proposals, norm=_norm_kind(cfg),
        vote_neighbors=cfg.head_vote_neighbors)
    return ForwardResult(
        seed_features=seed_features, seed_coords=seed_coords,
        seed_indices=seed_idx, enhanced=enhanced, importance=importance,
        vote_features=vote_features, vote_coords=vote_coords,
        vote_offsets=vote_offsets, proposals=proposals, scores=scores,
        yaws=yaws, refinements=refinements, proposal_centers=centers)


def compute_losses(tape: ad.Tape, cfg: Config, result: ForwardResult,
                   target: TrainingTarget):
    """Total loss node plus its breakdown for one training frame."""
    if result.importance is not None:
        l_imp = loss_importance(tape, result.importance, target.seed_labels)
    else:
        l_imp = ad.zero_scalar()
    l_off, no_pos = loss_offset(
        tape, result.vote_coords, result.importance, target.seed_labels,
        target.gt_center, couple_importance=cfg.couple_importance_grad)
    l_score, no_scored = loss_score(
        tape, result.scores, result.proposal_centers.value, target.gt_center,
        cfg.r_pos, cfg.r_neg)
    l_cr = loss_center_rot(
        tape, result.refinements, result.yaws, result.proposal_centers,
        result.proposal_centers.value, target.gt_center, target.gt_box.yaw,
        cfg.r_pos)
    weights = LossWeights(lambda_imp=cfg.lambda_imp,
                          lambda_score=cfg.lambda_score,
                          lambda_center_rot=cfg.lambda_center_rot)
    return loss_total(tape, l_off, l_imp, l_score, l_cr, weights,
                      no_positive_seeds=no_pos, no_scored_proposals=no_scored)
