"""Training loop over consecutive-frame pairs sampled from sequences.

Each step crops a template from frame t-1 (its ground-truth box) and a
search region from frame t around a jittered copy of that box, expresses
both in the reference box frame, and optimizes the total loss with momentum
SGD. Loss curves go to a CSV (step, l_off, l_imp, l_score, l_center_rot,
total); checkpoints embed the full config JSON.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import Config
from .data import Sequence
from .errors import DataError, NumericError
from .geometry import Box3D, wrap_angle
from .losses import LossBreakdown, make_training_target
from .network import build_model, compute_losses, forward
from .nn import ParamStore
from .tracker import STREAM_TRAIN, crop_search_region, crop_template, to_box_frame

MAX_PAIR_RETRIES = 16


@dataclass(frozen=True)
class TrainingExample:
    template_coords: np.ndarray   # in the reference box frame
    search_coords: np.ndarray     # in the reference box frame
    ref_box: Box3D                # reference box at the origin, yaw 0
    gt_box: Box3D                 # search-frame ground truth, reference frame


def make_training_example(cfg: Config, sequence: Sequence, t: int,
                          rng) -> TrainingExample | None:
    """Template from frame t-1, search from frame t; None if the crop is empty.

    The template is cropped at the frame t-1 ground-truth box and expressed
    in that box's own frame, exactly as at tracking time. The search-region
    reference is the same box with a small random pose jitter, simulating
    the drifted previous prediction the tracker will actually supply.
    """
    prev, cur = sequence.frames[t - 1], sequence.frames[t]
    if prev.gt_box is None or cur.gt_box is None:
        raise DataError(f"training pair ({t - 1}, {t}) lacks ground truth")
    template_box = prev.gt_box
    template = crop_template(prev, template_box, cfg.n_template, rng)
    ref = template_box
    if cfg.train_jitter_center > 0 or cfg.train_jitter_yaw > 0:
        # mixture over drift magnitudes: clean references teach precision,
        # heavily drifted ones teach correction
        u = rng.integers(3) / 2.0
        ref = Box3D(
            template_box.center + rng.normal(scale=u * cfg.train_jitter_center, size=3),
            template_box.size,
            template_box.yaw + rng.normal(scale=u * cfg.train_jitter_yaw))
    search = crop_search_region(cur.cloud.coords, ref, cfg.search_margin,
                                cfg.n_search, rng)
    if search is None:
        return None
    return TrainingExample(
        template_coords=to_box_frame(template, template_box),
        search_coords=to_box_frame(search, ref),
        ref_box=Box3D(np.zeros(3), ref.size.copy(), 0.0),
        gt_box=Box3D(to_box_frame(cur.gt_box.center, ref), cur.gt_box.size,
                     wrap_angle(cur.gt_box.yaw - ref.yaw)),
    )


def train_step(store: ParamStore, cfg: Config,
               examples: list[TrainingExample],
               lr: float | None = None) -> LossBreakdown:
    """One update from a batch of frame pairs; returns the mean breakdown."""
    store.zero_grad()
    scale = 1.0 / len(examples)
    sums = np.zeros(5)
    flags = [False, False]
    for example in examples:
        tape = ad.Tape()
        result = forward(tape, store, cfg, example.template_coords,
                         example.search_coords, example.ref_box)
        target = make_training_target(example.gt_box, result.seed_coords)
        total, breakdown = compute_losses(tape, cfg, result, target)
        tape.backward(ad.mul_const(tape, total, scale))
        sums += scale * np.array([breakdown.l_off, breakdown.l_imp,
                                  breakdown.l_score, breakdown.l_center_rot,
                                  breakdown.total])
        flags[0] |= breakdown.no_positive_seeds
        flags[1] |= breakdown.no_scored_proposals
    store.sgd_step(cfg.lr if lr is None else lr, cfg.momentum)
    return LossBreakdown(l_off=float(sums[0]), l_imp=float(sums[1]),
                         l_score=float(sums[2]), l_center_rot=float(sums[3]),
                         total=float(sums[4]),
                         no_positive_seeds=flags[0], no_scored_proposals=flags[1])


@dataclass
class TrainRun:
    store: ParamStore
    history: list[LossBreakdown]
    skipped_pairs: int = 0


def train(sequences: list[Sequence], cfg: Config, out_dir=None,
          store: ParamStore | None = None) -> TrainRun:
    """Run cfg.steps optimization steps over randomly sampled frame pairs."""
    pairs = [(si, t) for si, seq in enumerate(sequences)
             for t in range(1, len(seq))]
    if not pairs:
        raise DataError("no trainable frame pairs in the dataset")
    for seq in sequences:
        seq.require_ground_truth()
    if store is None:
        store = build_model(cfg)
    pair_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, STREAM_TRAIN, 0]))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    history: list[LossBreakdown] = []
    skipped = 0
    for step in range(cfg.steps):
        crop_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, STREAM_TRAIN, 1, step]))
        examples = []
        retries = 0
        while len(examples) < cfg.batch_size and retries < MAX_PAIR_RETRIES:
            si, t = pairs[int(pair_rng.integers(len(pairs)))]
            example = make_training_example(cfg, sequences[si], t, crop_rng)
            if example is None:
                skipped += 1
                retries += 1
            else:
                examples.append(example)
        if not examples:
            raise DataError(
                f"step {step}: {MAX_PAIR_RETRIES} consecutive empty search regions")
        lr = cfg.lr
        if step >= cfg.lr_decay_at * cfg.steps:
            lr = cfg.lr * cfg.lr_decay_factor
        try:
            breakdown = train_step(store, cfg, examples, lr=lr)
        except NumericError as exc:
            last = history[-1] if history else None
            raise NumericError(
                f"training aborted at step {step}: {exc} (previous losses: {last})"
            ) from exc
        history.append(breakdown)
        if out is not None and cfg.checkpoint_every > 0 \
                and (step + 1) % cfg.checkpoint_every == 0:
            store.save(out / f"checkpoint_{step + 1:06d}.txt", cfg.to_json())

    if out is not None:
        write_loss_csv(history, out / "losses.csv")
        store.save(out / "checkpoint_final.txt", cfg.to_json())
    return TrainRun(store=store, history=history, skipped_pairs=skipped)


def write_loss_csv(history: list[LossBreakdown], path) -> None:
    lines = ["step,l_off,l_imp,l_score,l_center_rot,total"]
    for step, b in enumerate(history):
        lines.append(f"{step},{b.l_off!r},{b.l_imp!r},{b.l_score!r},"
                     f"{b.l_center_rot!r},{b.total!r}")
    Path(path).write_text("\n".join(lines) + "\n")
