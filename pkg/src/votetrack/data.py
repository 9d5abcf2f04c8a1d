"""Sequence data: frame/sequence types, on-disk format, synthetic generation.

A sequence directory holds a versioned manifest listing per-frame point
files, the point files themselves (one "x y z" per line, meters), and a
ground-truth file with one "frame cx cy cz w h l yaw" line per frame:

    seq_000/
      manifest.txt   -> "VOTETRACK-SEQ v1", "category <name>", frame files
      gt.txt         -> "VOTETRACK-GT v1", then per-frame box lines
      frame_0000.xyz

The synthetic generator drops a rigid point template (box surface, L-shape,
or cylinder shell) into a constant-velocity trajectory, jitters it with
Gaussian noise, and scatters uniform clutter outside the target box.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import Box3D, PointCloud, points_in_box, wrap_angle

MANIFEST_MAGIC = "VOTETRACK-SEQ v1"
GT_MAGIC = "VOTETRACK-GT v1"

SHAPE_KINDS = ("box", "lshape", "cylinder")
SHAPE_FILL = 0.9          # template extent as a fraction of the box extents
CLUTTER_SPREAD = 3.0      # clutter band beyond the box half-extents, meters


@dataclass(frozen=True)
class Frame:
    cloud: PointCloud
    gt_box: Box3D | None = None


@dataclass(frozen=True)
class Sequence:
    frames: tuple[Frame, ...]
    category: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def template_box(self) -> Box3D:
        box = self.frames[0].gt_box
        if box is None:
            raise DataError("first frame has no ground-truth box")
        return box

    def require_ground_truth(self) -> None:
        for i, frame in enumerate(self.frames):
            if frame.gt_box is None:
                raise DataError(f"frame {i} lacks a ground-truth box")


# ---------------------------------------------------------------------------
# on-disk format


def write_sequence(sequence: Sequence, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"frame_{i:04d}.xyz" for i in range(len(sequence))]
    manifest = [MANIFEST_MAGIC, f"category {sequence.category}", *names]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    gt_lines = [GT_MAGIC]
    for i, (frame, name) in enumerate(zip(sequence.frames, names)):
        rows = (" ".join(repr(float(v)) for v in p) for p in frame.cloud.coords)
        (out / name).write_text("\n".join(rows) + "\n")
        if frame.gt_box is not None:
            b = frame.gt_box
            vals = [*b.center, *b.size, b.yaw]
            gt_lines.append(f"{i} " + " ".join(repr(float(v)) for v in vals))
    (out / "gt.txt").write_text("\n".join(gt_lines) + "\n")


def read_sequence(seq_dir) -> Sequence:
    root = Path(seq_dir)
    manifest_path = root / "manifest.txt"
    if not manifest_path.exists():
        raise DataError(f"{root} has no manifest.txt")
    lines = manifest_path.read_text().splitlines()
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise DataError(f"{manifest_path} has wrong magic (expected {MANIFEST_MAGIC!r})")
    if len(lines) < 2 or not lines[1].startswith("category "):
        raise DataError(f"{manifest_path} is missing the category line")
    category = lines[1][len("category "):]
    names = [ln for ln in lines[2:] if ln.strip()]

    boxes: dict[int, Box3D] = {}
    gt_path = root / "gt.txt"
    if gt_path.exists():
        gt_lines = gt_path.read_text().splitlines()
        if not gt_lines or gt_lines[0] != GT_MAGIC:
            raise DataError(f"{gt_path} has wrong magic (expected {GT_MAGIC!r})")
        for ln in gt_lines[1:]:
            if not ln.strip():
                continue
            toks = ln.split()
            if len(toks) != 8:
                raise DataError(f"malformed ground-truth line in {gt_path}: {ln!r}")
            try:
                idx = int(toks[0])
                vals = [float(t) for t in toks[1:]]
            except ValueError as exc:
                raise DataError(f"malformed ground-truth line in {gt_path}: {ln!r}") from exc
            boxes[idx] = Box3D(vals[0:3], vals[3:6], vals[6])

    frames = []
    for i, name in enumerate(names):
        path = root / name
        if not path.exists():
            raise DataError(f"point file {path} listed in manifest is missing")
        try:
            coords = np.loadtxt(path, ndmin=2)
        except ValueError as exc:
            raise DataError(f"cannot parse point file {path}: {exc}") from exc
        if coords.size == 0:
            raise DataError(f"point file {path} is empty")
        if coords.shape[1] != 3:
            raise DataError(f"point file {path} must have 3 columns")
        frames.append(Frame(cloud=PointCloud(coords), gt_box=boxes.get(i)))
    if not frames:
        raise DataError(f"{root} lists no frames")
    return Sequence(frames=tuple(frames), category=category)


def read_dataset(data_dir) -> list[Sequence]:
    """All sequences under a directory, sorted by subdirectory name."""
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    seq_dirs = sorted(p for p in root.iterdir() if (p / "manifest.txt").exists())
    if not seq_dirs:
        raise DataError(f"{root} contains no sequence directories")
    return [read_sequence(p) for p in seq_dirs]


# ---------------------------------------------------------------------------
# synthetic generation


def _template_points(kind: str, count: int, box_size, rng) -> np.ndarray:
    """Rigid template in the box frame, inside SHAPE_FILL of the extents."""
    hx, hy, hz = SHAPE_FILL * 0.5 * np.asarray(box_size, dtype=np.float64)
    pts = np.empty((count, 3))
    if kind == "box":
        # area-weighted choice among the 6 faces of the inner box
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        faces = rng.choice(6, size=count, p=areas / areas.sum())
        u = rng.uniform(-1, 1, size=(count, 2))
        for i, face in enumerate(faces):
            axis = face // 2
            sign = 1.0 if face % 2 == 0 else -1.0
            spans = [hx, hy, hz]
            fixed = spans.pop(axis)
            point = [u[i, 0] * spans[0], u[i, 1] * spans[1]]
            point.insert(axis, sign * fixed)
            pts[i] = point
    elif kind == "lshape":
        # two perpendicular vertical walls meeting at the (-hx, -hy) corner
        wall = rng.uniform(size=count) < 0.5
        u = rng.uniform(-1, 1, size=count)
        z = rng.uniform(-hz, hz, size=count)
        pts[wall] = np.stack([u[wall] * hx, np.full(wall.sum(), -hy), z[wall]], axis=1)
        pts[~wall] = np.stack([np.full((~wall).sum(), -hx), u[~wall] * hy, z[~wall]], axis=1)
    elif kind == "cylinder":
        radius = min(hx, hy)
        theta = rng.uniform(0, 2 * np.pi, size=count)
        z = rng.uniform(-hz, hz, size=count)
        pts = np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)
    else:
        raise ValueError(f"unknown shape kind {kind!r}; choose from {SHAPE_KINDS}")
    return pts


def _clutter_points(count: int, box: Box3D, rng) -> np.ndarray:
    """Uniform points near but outside the target box."""
    if count == 0:
        return np.empty((0, 3))
    lo = box.center - 0.5 * box.size - CLUTTER_SPREAD
    hi = box.center + 0.5 * box.size + CLUTTER_SPREAD
    pts = np.empty((count, 3))
    filled = 0
    while filled < count:
        batch = rng.uniform(lo, hi, size=(count - filled, 3))
        keep = batch[~points_in_box(batch, box)]
        pts[filled:filled + len(keep)] = keep
        filled += len(keep)
    return pts


def generate_sequence(kind: str, frames: int, points: int, box_size,
                      translation, yaw_rate: float, noise: float, clutter: int,
                      seed: int, start_center=(0.0, 0.0, 0.0), start_yaw: float = 0.0,
                      category: str = "synthetic") -> Sequence:
    """A rigid target on a constant-velocity trajectory with jitter and clutter.

    Ground-truth boxes follow the motion exactly; the same seed always yields
    the identical sequence.
    """
    if frames < 2:
        raise ValueError("a sequence needs at least two frames")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    template = _template_points(kind, points, box_size, rng)
    translation = np.asarray(translation, dtype=np.float64)
    start_center = np.asarray(start_center, dtype=np.float64)

    out_frames = []
    for k in range(frames):
        center = start_center + k * translation
        yaw = wrap_angle(start_yaw + k * yaw_rate)
        box = Box3D(center, box_size, yaw)
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        target = template @ rot.T + center
        if noise > 0:
            target = target + rng.normal(scale=noise, size=target.shape)
        cloud = np.vstack([target, _clutter_points(clutter, box, rng)])
        cloud = cloud[rng.permutation(len(cloud))]
        out_frames.append(Frame(cloud=PointCloud(cloud), gt_box=box))
    return Sequence(frames=tuple(out_frames), category=category)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a synthetic dataset, parsed from a JSON object."""

    sequences: int = 1
    frames: int = 20
    shape: str = "lshape"
    points: int = 256
    box_size: tuple = (2.4, 1.2, 1.0)
    translation: tuple = (0.08, 0.04, 0.0)
    yaw_rate: float = 0.02
    noise: float = 0.02
    clutter: int = 50
    seed: int = 0
    category: str = "synthetic"

    @classmethod
    def from_dict(cls, data: dict) -> "GenSpec":
        import dataclasses
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DataError(f"unknown generator keys: {sorted(unknown)}")
        spec = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
        if spec.shape not in SHAPE_KINDS:
            raise DataError(f"shape must be one of {SHAPE_KINDS}, got {spec.shape!r}")
        if spec.sequences < 1 or spec.frames < 2 or spec.points < 1:
            raise DataError("need sequences >= 1, frames >= 2, points >= 1")
        return spec


def generate_dataset(spec: GenSpec) -> list[Sequence]:
    """One sequence per index, each with its own derived seed."""
    return [
        generate_sequence(
            kind=spec.shape, frames=spec.frames, points=spec.points,
            box_size=spec.box_size, translation=spec.translation,
            yaw_rate=spec.yaw_rate, noise=spec.noise, clutter=spec.clutter,
            seed=spec.seed * 1000 + i, category=spec.category)
        for i in range(spec.sequences)
    ]
