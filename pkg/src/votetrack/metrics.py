"""One-pass evaluation: per-frame overlap/error and Success/Precision AUCs.

Success integrates the fraction of frames whose box IoU exceeds a threshold
swept over [0, 1]; Precision does the same for center error under thresholds
on [0, 2] meters. Both use a fixed 201-point uniform grid, strict
inequalities, trapezoidal integration, and a x100 scale. Frames are pooled
across sequences; frame 0 (the given box) is excluded.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .data import Sequence
from .geometry import Box3D, box_iou_3d
from .nn import ParamStore
from .tracker import track_sequence

THRESHOLD_POINTS = 201
SUCCESS_MAX = 1.0
PRECISION_MAX_METERS = 2.0


@dataclass(frozen=True)
class FrameResult:
    sequence: int
    frame: int
    overlap: float    # IoU in [0, 1]
    error: float      # center distance, meters


@dataclass(frozen=True)
class OPEReport:
    success: float            # AUC x100
    precision: float          # AUC x100
    n_frames: int
    n_sequences: int
    flagged_frames: int
    frame_results: tuple[FrameResult, ...]


def success_auc(overlaps) -> float:
    """AUC x100 of the fraction of frames with overlap strictly above each
    threshold on [0, 1]."""
    overlaps = np.asarray(overlaps, dtype=np.float64)
    if overlaps.size == 0:
        raise ValueError("success_auc needs at least one overlap")
    if overlaps.min() < 0 or overlaps.max() > 1:
        raise ValueError("overlaps must lie in [0, 1]")
    taus = np.linspace(0.0, SUCCESS_MAX, THRESHOLD_POINTS)
    frac = (overlaps[None, :] > taus[:, None]).mean(axis=1)
    return float(np.trapezoid(frac, taus) / SUCCESS_MAX * 100.0)


def precision_auc(errors) -> float:
    """AUC x100 of the fraction of frames with error strictly below each
    threshold on [0, 2] meters."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("precision_auc needs at least one error")
    if errors.min() < 0:
        raise ValueError("errors must be non-negative")
    taus = np.linspace(0.0, PRECISION_MAX_METERS, THRESHOLD_POINTS)
    frac = (errors[None, :] < taus[:, None]).mean(axis=1)
    return float(np.trapezoid(frac, taus) / PRECISION_MAX_METERS * 100.0)


def frame_metrics(predicted: Box3D, gt: Box3D) -> tuple[float, float]:
    overlap = box_iou_3d(predicted, gt)
    error = float(np.linalg.norm(predicted.center - gt.center))
    return overlap, error


def evaluate(sequences: list[Sequence], store: ParamStore,
             cfg: Config) -> OPEReport:
    """Track every sequence once and pool the per-frame results."""
    results = []
    flagged = 0
    for si, seq in enumerate(sequences):
        seq.require_ground_truth()
        boxes, seq_flagged = track_sequence(store, cfg, seq)
        flagged += seq_flagged
        for fi in range(1, len(seq)):
            overlap, error = frame_metrics(boxes[fi], seq.frames[fi].gt_box)
            results.append(FrameResult(sequence=si, frame=fi,
                                       overlap=overlap, error=error))
    overlaps = [r.overlap for r in results]
    errors = [r.error for r in results]
    return OPEReport(
        success=success_auc(overlaps),
        precision=precision_auc(errors),
        n_frames=len(results),
        n_sequences=len(sequences),
        flagged_frames=flagged,
        frame_results=tuple(results),
    )


def write_frame_csv(report: OPEReport, path) -> None:
    lines = ["sequence,frame,overlap,error"]
    for r in report.frame_results:
        lines.append(f"{r.sequence},{r.frame},{r.overlap!r},{r.error!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_json(report: OPEReport, path) -> None:
    summary = {
        "success": report.success,
        "precision": report.precision,
        "frames": report.n_frames,
        "sequences": report.n_sequences,
        "flagged_frames": report.flagged_frames,
    }
    Path(path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
