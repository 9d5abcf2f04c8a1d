import numpy as np
import pytest

from votetrack.data import (
    Frame,
    GenSpec,
    Sequence,
    generate_dataset,
    generate_sequence,
    read_dataset,
    read_sequence,
    write_sequence,
)
from votetrack.errors import DataError
from votetrack.geometry import Box3D, PointCloud, points_in_box, rotate_z


def small_sequence(seed=0, **kw):
    args = dict(kind="lshape", frames=5, points=64, box_size=(2.0, 1.0, 0.8),
                translation=(0.1, 0.05, 0.0), yaw_rate=0.03, noise=0.01,
                clutter=20, seed=seed)
    args.update(kw)
    return generate_sequence(**args)


class TestGenerator:
    def test_same_seed_same_sequence(self):
        a, b = small_sequence(7), small_sequence(7)
        for fa, fb in zip(a.frames, b.frames):
            np.testing.assert_array_equal(fa.cloud.coords, fb.cloud.coords)
            np.testing.assert_array_equal(fa.gt_box.center, fb.gt_box.center)

    def test_different_seed_differs(self):
        a, b = small_sequence(1), small_sequence(2)
        assert not np.array_equal(a.frames[0].cloud.coords, b.frames[0].cloud.coords)

    def test_gt_boxes_follow_motion_exactly(self):
        seq = small_sequence(3)
        b0 = seq.frames[0].gt_box
        for k, frame in enumerate(seq.frames):
            np.testing.assert_allclose(frame.gt_box.center,
                                       b0.center + k * np.array([0.1, 0.05, 0.0]),
                                       atol=1e-12)
            assert frame.gt_box.yaw == pytest.approx(b0.yaw + k * 0.03, abs=1e-12)

    def test_noiseless_points_follow_rigid_motion(self):
        seq = small_sequence(4, noise=0.0, clutter=0)
        for k in range(len(seq) - 1):
            a = seq.frames[k]
            b = seq.frames[k + 1]
            box_a, box_b = a.gt_box, b.gt_box
            moved = rotate_z(a.cloud.coords - box_a.center, 0.03) + box_b.center
            # frames are shuffled independently; compare as sorted point sets
            np.testing.assert_allclose(
                np.sort(moved.round(9), axis=0),
                np.sort(b.cloud.coords.round(9), axis=0), atol=1e-9)

    def test_target_points_inside_box_at_small_noise(self):
        seq = small_sequence(5, noise=0.02, clutter=0, points=500,
                             box_size=(1.0, 1.0, 1.0))
        for frame in seq.frames:
            inside = points_in_box(frame.cloud.coords, frame.gt_box)
            assert inside.mean() >= 0.95

    def test_clutter_outside_box(self):
        seq = small_sequence(6, noise=0.0, clutter=100, points=30)
        frame = seq.frames[0]
        inside = points_in_box(frame.cloud.coords, frame.gt_box)
        assert inside.sum() == 30  # exactly the target points

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            small_sequence(0, frames=1)

    @pytest.mark.parametrize("kind", ["box", "lshape", "cylinder"])
    def test_all_shapes_generate(self, kind):
        seq = small_sequence(8, kind=kind)
        assert len(seq) == 5
        inside = points_in_box(seq.frames[0].cloud.coords, seq.frames[0].gt_box)
        assert inside.sum() >= 60  # nearly all target points contained

    def test_unknown_shape(self):
        with pytest.raises(ValueError):
            small_sequence(9, kind="sphere")


class TestSequenceIO:
    def test_roundtrip(self, tmp_path):
        seq = small_sequence(10)
        write_sequence(seq, tmp_path / "seq")
        loaded = read_sequence(tmp_path / "seq")
        assert len(loaded) == len(seq)
        assert loaded.category == seq.category
        for fa, fb in zip(seq.frames, loaded.frames):
            np.testing.assert_array_equal(fa.cloud.coords, fb.cloud.coords)
            np.testing.assert_array_equal(fa.gt_box.center, fb.gt_box.center)
            np.testing.assert_array_equal(fa.gt_box.size, fb.gt_box.size)
            assert fa.gt_box.yaw == fb.gt_box.yaw

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            read_sequence(tmp_path)

    def test_bad_magic(self, tmp_path):
        d = tmp_path / "seq"
        d.mkdir()
        (d / "manifest.txt").write_text("WRONG\ncategory x\n")
        with pytest.raises(DataError):
            read_sequence(d)

    def test_missing_point_file(self, tmp_path):
        seq = small_sequence(11)
        write_sequence(seq, tmp_path / "seq")
        (tmp_path / "seq" / "frame_0002.xyz").unlink()
        with pytest.raises(DataError):
            read_sequence(tmp_path / "seq")

    def test_read_dataset_sorted(self, tmp_path):
        for i, seed in enumerate([3, 1, 2]):
            write_sequence(small_sequence(seed), tmp_path / f"seq_{i:03d}")
        seqs = read_dataset(tmp_path)
        assert len(seqs) == 3

    def test_read_dataset_empty(self, tmp_path):
        with pytest.raises(DataError):
            read_dataset(tmp_path)


class TestGenSpec:
    def test_from_dict_defaults(self):
        spec = GenSpec.from_dict({"sequences": 2, "frames": 4})
        assert spec.sequences == 2 and spec.frames == 4
        assert spec.shape == "lshape"

    def test_unknown_key(self):
        with pytest.raises(DataError):
            GenSpec.from_dict({"wat": 1})

    def test_dataset_generation_per_sequence_seeds(self):
        spec = GenSpec.from_dict({"sequences": 2, "frames": 3, "points": 20,
                                  "clutter": 5, "seed": 4})
        a, b = generate_dataset(spec)
        assert not np.array_equal(a.frames[0].cloud.coords, b.frames[0].cloud.coords)


class TestSequenceType:
    def test_template_box_requires_gt(self):
        cloud = PointCloud(np.zeros((4, 3)))
        seq = Sequence(frames=(Frame(cloud=cloud), Frame(cloud=cloud)))
        with pytest.raises(DataError):
            _ = seq.template_box

    def test_require_ground_truth(self):
        cloud = PointCloud(np.zeros((4, 3)))
        box = Box3D((0, 0, 0), (1, 1, 1))
        seq = Sequence(frames=(Frame(cloud, box), Frame(cloud, None)))
        with pytest.raises(DataError):
            seq.require_ground_truth()
