"""Training objectives: importance, weighted offsets, score, center/yaw.

The offset loss is a smooth-L1 pull of positive-seed votes toward the ground
truth center, scaled per seed by (1 + importance); by default that weight is
detached so the importance branch is trained by its own cross-entropy alone
(a config switch couples them). Score and center/rotation terms are
desk-scale stand-ins: proposals within `r_pos` of the center are positives,
beyond `r_neg` negatives, and the band in between is ignored.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import NumericError
from .geometry import Box3D, points_in_box, wrap_angle

SMOOTH_L1_DELTA = 1.0


@dataclass(frozen=True)
class TrainingTarget:
    """Ground truth for one frame: the box, its center, per-seed labels."""

    gt_box: Box3D
    gt_center: np.ndarray     # (3,)
    seed_labels: np.ndarray   # (M,) float 0/1, 1 iff seed inside gt_box


def make_training_target(gt_box: Box3D, seed_coords: np.ndarray) -> TrainingTarget:
    labels = points_in_box(seed_coords, gt_box).astype(np.float64)
    return TrainingTarget(gt_box=gt_box, gt_center=gt_box.center.copy(),
                          seed_labels=labels)


@dataclass(frozen=True)
class LossWeights:
    lambda_imp: float = 0.5
    lambda_score: float = 1.0
    lambda_center_rot: float = 1.0

    def __post_init__(self):
        vals = (self.lambda_imp, self.lambda_score, self.lambda_center_rot)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError("loss weights must be finite and non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    l_off: float
    l_imp: float
    l_score: float
    l_center_rot: float
    total: float
    no_positive_seeds: bool = False
    no_scored_proposals: bool = False


def loss_importance(tape: ad.Tape, importance: ad.Node,
                    labels: np.ndarray) -> ad.Node:
    """Mean binary cross entropy of the importance vector against 0/1 labels."""
    if importance.value.shape != labels.shape:
        raise ValueError("importance and labels must have equal length")
    return ad.mean_all(tape, ad.binary_cross_entropy(tape, importance, labels))


def loss_offset(tape: ad.Tape, vote_coords: ad.Node, importance: ad.Node | None,
                labels: np.ndarray, gt_center: np.ndarray,
                couple_importance: bool = False):
    """Importance-weighted smooth-L1 pull of positive votes to the center.

    Negative seeds contribute nothing. Returns (scalar node, flagged) where
    flagged marks a frame with no positive seeds (loss defined as 0).
    """
    n_pos = float(labels.sum())
    if n_pos == 0:
        return ad.zero_scalar(), True
    target = np.broadcast_to(gt_center, vote_coords.value.shape)
    per_coord = ad.smooth_l1(tape, vote_coords, target, delta=SMOOTH_L1_DELTA)
    per_seed = ad.sum_axis(tape, per_coord, axis=1)
    if importance is None:
        weighted = ad.mul_const(tape, per_seed, labels)
    elif couple_importance:
        w = ad.mul_const(tape, ad.add_const(tape, importance, 1.0), labels)
        weighted = ad.mul(tape, per_seed, w)
    else:
        weighted = ad.mul_const(tape, per_seed, (1.0 + importance.value) * labels)
    return ad.mul_const(tape, ad.sum_all(tape, weighted), 1.0 / n_pos), False


def _proposal_masks(centers_value: np.ndarray, gt_center: np.ndarray,
                    r_pos: float, r_neg: float):
    d = np.linalg.norm(centers_value - gt_center, axis=1)
    positive = d <= r_pos
    scored = positive | (d > r_neg)
    return positive.astype(np.float64), scored.astype(np.float64)


def loss_score(tape: ad.Tape, scores: ad.Node, centers_value: np.ndarray,
               gt_center: np.ndarray, r_pos: float, r_neg: float):
    """BCE over proposals outside the dead zone; (node, flagged) like above."""
    positive, scored = _proposal_masks(centers_value, gt_center, r_pos, r_neg)
    n_scored = float(scored.sum())
    if n_scored == 0:
        return ad.zero_scalar(), True
    bce = ad.binary_cross_entropy(tape, scores, positive)
    return ad.mul_const(tape, ad.sum_all(tape, ad.mul_const(tape, bce, scored)),
                        1.0 / n_scored), False


def loss_center_rot(tape: ad.Tape, refinements: ad.Node, yaws: ad.Node,
                    centers: ad.Node, centers_value: np.ndarray,
                    gt_center: np.ndarray, gt_yaw: float, r_pos: float) -> ad.Node:
    """Smooth-L1 on refined centers and wrapped yaw over positive proposals."""
    positive, _ = _proposal_masks(centers_value, gt_center, r_pos, np.inf)
    n_pos = float(positive.sum())
    if n_pos == 0:
        return ad.zero_scalar()
    refined = ad.add(tape, centers, refinements)
    center_term = ad.sum_axis(
        tape, ad.smooth_l1(tape, refined, np.broadcast_to(gt_center, refined.value.shape),
                           delta=SMOOTH_L1_DELTA), axis=1)
    # express the wrapped residual as yaw minus a constant shift, so the
    # gradient passes straight through the wrap
    wrapped = np.array([wrap_angle(v - gt_yaw) for v in yaws.value])
    residual = ad.sub_const(tape, yaws, yaws.value - wrapped)
    yaw_term = ad.smooth_l1(tape, residual, np.zeros_like(wrapped),
                            delta=SMOOTH_L1_DELTA)
    per_proposal = ad.add(tape, center_term, yaw_term)
    return ad.mul_const(tape, ad.sum_all(tape, ad.mul_const(tape, per_proposal, positive)),
                        1.0 / n_pos)


def loss_total(tape: ad.Tape, l_off: ad.Node, l_imp: ad.Node, l_score: ad.Node,
               l_center_rot: ad.Node, weights: LossWeights,
               no_positive_seeds: bool = False, no_scored_proposals: bool = False):
    """Weighted sum of the four terms; returns (total node, LossBreakdown)."""
    parts = {"l_off": l_off, "l_imp": l_imp, "l_score": l_score,
             "l_center_rot": l_center_rot}
    for name, node in parts.items():
        if not np.isfinite(node.value):
            raise NumericError(f"loss term {name} is non-finite: {node.value}")
    total = ad.add(
        tape,
        ad.add(tape, ad.add(tape, l_off, ad.mul_const(tape, l_imp, weights.lambda_imp)),
               ad.mul_const(tape, l_score, weights.lambda_score)),
        ad.mul_const(tape, l_center_rot, weights.lambda_center_rot))
    breakdown = LossBreakdown(
        l_off=float(l_off.value),
        l_imp=float(l_imp.value),
        l_score=float(l_score.value),
        l_center_rot=float(l_center_rot.value),
        total=float(l_off.value)
        + weights.lambda_imp * float(l_imp.value)
        + weights.lambda_score * float(l_score.value)
        + weights.lambda_center_rot * float(l_center_rot.value),
        no_positive_seeds=no_positive_seeds,
        no_scored_proposals=no_scored_proposals,
    )
    return total, breakdown
