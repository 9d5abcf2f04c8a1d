"""Frame-by-frame tracking: cropping, canonicalization, state carry-over.

The network always operates in the reference box frame (the previous
prediction while tracking, the previous ground truth while training): points
are translated to the box center and un-rotated by its yaw, so the model
only ever regresses the residual motion between consecutive frames.
Predictions are mapped back to world coordinates afterwards. The template is
fixed at frame 0 and never updated; the target size is carried through
unchanged. Frames whose search region comes up empty reuse the previous box
and are counted as flagged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .config import Config
from .data import Frame, Sequence
from .errors import DataError
from .geometry import Box3D, points_in_box, rotate_z, wrap_angle
from .network import forward
from .heads import assemble_box
from .nn import ParamStore

# stream tags keep the seeded RNG draws of unrelated stages independent
STREAM_TRACK = 11
STREAM_TRAIN = 13


def resample(coords: np.ndarray, count: int, rng) -> np.ndarray:
    """Exactly `count` rows: downsample without replacement, upsample with."""
    n = coords.shape[0]
    if n == count:
        return coords.copy()
    if n > count:
        idx = rng.choice(n, size=count, replace=False)
    else:
        idx = rng.choice(n, size=count, replace=True)
    return coords[np.sort(idx)]


def crop_search_region(coords: np.ndarray, prev_box: Box3D, margin: float,
                       count: int, rng) -> np.ndarray | None:
    """Points inside the margin-inflated previous box, resampled to `count`.

    Boundary points are included. Returns None when the region is empty.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    mask = points_in_box(coords, prev_box.inflated(margin))
    if not mask.any():
        return None
    return resample(coords[mask], count, rng)


def crop_template(frame: Frame, box: Box3D, count: int, rng) -> np.ndarray:
    """First-frame points inside the target box, resampled to `count`."""
    mask = points_in_box(frame.cloud.coords, box)
    if not mask.any():
        raise DataError("no points inside the template box")
    return resample(frame.cloud.coords[mask], count, rng)


def to_box_frame(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Express world points in the box frame (translate, then un-rotate)."""
    return rotate_z(points - box.center, -box.yaw)


def box_from_frame(local: Box3D, ref: Box3D) -> Box3D:
    """Map a box predicted in the reference frame back to world coordinates."""
    return Box3D(rotate_z(local.center, ref.yaw) + ref.center, local.size,
                 wrap_angle(ref.yaw + local.yaw))


@dataclass
class TrackerState:
    template_coords: np.ndarray   # in the frame-0 box frame
    template_size: np.ndarray
    prev_box: Box3D
    flagged_frames: int = 0


def init_tracker(frame0: Frame, cfg: Config) -> TrackerState:
    if frame0.gt_box is None:
        raise DataError("tracking needs a ground-truth box on frame 0")
    box = frame0.gt_box
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, STREAM_TRACK, 0]))
    template = crop_template(frame0, box, cfg.n_template, rng)
    return TrackerState(
        template_coords=to_box_frame(template, box),
        template_size=box.size.copy(),
        prev_box=box,
    )


def track_frame(store: ParamStore, cfg: Config, state: TrackerState,
                frame: Frame, frame_index: int) -> Box3D:
    """Predict the box for one frame and advance the state."""
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, STREAM_TRACK, frame_index]))
    crop = crop_search_region(frame.cloud.coords, state.prev_box,
                              cfg.search_margin, cfg.n_search, rng)
    if crop is None:
        state.flagged_frames += 1
        return state.prev_box
    ref_box = Box3D(np.zeros(3), state.template_size, 0.0)
    tape = ad.Tape()
    result = forward(tape, store, cfg, state.template_coords,
                     to_box_frame(crop, state.prev_box), ref_box)
    local = assemble_box(result.head_output(), result.proposals,
                         state.template_size)
    box = box_from_frame(local, state.prev_box)
    state.prev_box = box
    return box


def track_sequence(store: ParamStore, cfg: Config,
                   sequence: Sequence) -> tuple[list[Box3D], int]:
    """One-pass tracking from frame 0; returns per-frame boxes and the
    number of flagged (empty-region) frames. Frame 0 reports the given box."""
    if len(sequence) < 2:
        raise DataError("tracking needs at least two frames")
    state = init_tracker(sequence.frames[0], cfg)
    boxes = [state.prev_box]
    for i, frame in enumerate(sequence.frames[1:], start=1):
        boxes.append(track_frame(store, cfg, state, frame, i))
    return boxes, state.flagged_frames
