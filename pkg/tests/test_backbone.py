import numpy as np
import pytest

import votetrack.autodiff as ad
from votetrack.backbone import (
    box_prior,
    extract_seeds,
    lexicographic_start,
    local_point_features,
    register_backbone,
)
from votetrack.config import Config
from votetrack.errors import DataError
from votetrack.geometry import Box3D
from votetrack.gradcheck import check_gradients
from votetrack.nn import ParamStore


def tiny_config(**kw):
    base = dict(seed=0, n_template=24, n_search=40, n_seeds=12, feature_dim=8,
                attn_dim=4, sa_dim=6, sa_neighbors=4, sparse_samples=4,
                knn_samples=4, n_proposals=6)
    base.update(kw)
    return Config(**base).validate()


def make_clouds(seed=0, n_template=24, n_search=40):
    rng = np.random.default_rng(seed)
    template = rng.normal(size=(n_template, 3)) * 0.5
    search = rng.normal(size=(n_search, 3)) * 1.5
    return template, search


def run_extract(store, cfg, template, search, box):
    tape = ad.Tape()
    feats, coords, idx = extract_seeds(tape, store, cfg, template, search, box)
    return feats.value, coords, idx


class TestExtractSeeds:
    def test_deterministic_and_finite(self):
        cfg = tiny_config()
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, search = make_clouds(1)
        box = Box3D((0, 0, 0), (1.5, 1.0, 0.8), 0.2)
        a = run_extract(store, cfg, template, search, box)
        b = run_extract(store, cfg, template, search, box)
        assert np.all(np.isfinite(a[0]))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_seed_coords_subset_of_search(self):
        cfg = tiny_config()
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, search = make_clouds(2)
        _, coords, idx = run_extract(store, cfg, template, search,
                                     Box3D((0, 0, 0), (1, 1, 1)))
        np.testing.assert_array_equal(coords, search[idx])

    def test_search_permutation_leaves_seeds_unchanged(self):
        cfg = tiny_config()
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, search = make_clouds(3)
        box = Box3D((0.1, 0, 0), (1.2, 0.9, 0.7), -0.4)
        feats_a, coords_a, _ = run_extract(store, cfg, template, search, box)
        perm = np.random.default_rng(4).permutation(len(search))
        feats_b, coords_b, _ = run_extract(store, cfg, template, search[perm], box)
        np.testing.assert_array_equal(coords_a, coords_b)
        np.testing.assert_array_equal(feats_a, feats_b)

    def test_template_permutation_is_exactly_invariant(self):
        cfg = tiny_config()
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, search = make_clouds(5)
        box = Box3D((0, 0, 0), (1, 1, 1))
        feats_a, _, _ = run_extract(store, cfg, template, search, box)
        perm = np.random.default_rng(6).permutation(len(template))
        feats_b, _, _ = run_extract(store, cfg, template[perm], search, box)
        np.testing.assert_array_equal(feats_a, feats_b)

    def test_too_few_search_points(self):
        cfg = tiny_config()
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, _ = make_clouds(7)
        with pytest.raises(DataError):
            run_extract(store, cfg, template, np.zeros((5, 3)),
                        Box3D((0, 0, 0), (1, 1, 1)))

    def test_gradients(self):
        cfg = tiny_config(n_template=8, n_search=14, n_seeds=5, sa_neighbors=3,
                          n_proposals=3, sparse_samples=2, knn_samples=2)
        store = ParamStore(cfg.seed)
        register_backbone(store, cfg)
        template, search = make_clouds(8, n_template=8, n_search=14)
        box = Box3D((0, 0, 0), (1, 1, 1), 0.3)
        proj = np.random.default_rng(9).normal(size=(5, cfg.feature_dim))

        def build(tape):
            feats, _, _ = extract_seeds(tape, store, cfg, template, search, box)
            return ad.sum_all(tape, ad.mul_const(tape, feats, proj))

        def backward_fn():
            tape = ad.Tape()
            tape.backward(build(tape))

        check_gradients(lambda: float(build(ad.Tape()).value), backward_fn, store)


class TestBoxPrior:
    def test_center_point(self):
        box = Box3D((1, 2, 3), (2, 4, 6), 0.5)
        prior = box_prior(np.array([[1.0, 2.0, 3.0]]), box)
        np.testing.assert_allclose(prior[0, :3], 0.0, atol=1e-12)
        np.testing.assert_allclose(prior[0, 3:], [1, 1, 2, 2, 3, 3], atol=1e-12)

    def test_face_distances_vanish_on_faces(self):
        box = Box3D((0, 0, 0), (2, 2, 2))
        prior = box_prior(np.array([[1.0, 0.0, 0.0]]), box)  # on the +x face
        assert prior[0, 3] == pytest.approx(0.0)
        assert prior[0, 4] == pytest.approx(2.0)

    def test_rigid_invariance(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(20, 3))
        box = Box3D((0.2, -0.1, 0.4), (1.5, 1.0, 0.8), 0.3)
        base = box_prior(pts, box)
        theta, shift = 0.9, np.array([5.0, -3.0, 1.0])
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        moved = box_prior(pts @ rot.T + shift,
                          Box3D(rot @ box.center + shift, box.size, box.yaw + theta))
        np.testing.assert_allclose(base, moved, atol=1e-9)


def test_lexicographic_start_is_permutation_invariant():
    rng = np.random.default_rng(11)
    coords = rng.normal(size=(30, 3))
    base = lexicographic_start(coords)
    perm = rng.permutation(30)
    permuted = lexicographic_start(coords[perm])
    assert perm[permuted] == base


def test_local_features_shape():
    cfg = tiny_config()
    store = ParamStore(0)
    register_backbone(store, cfg)
    coords = np.random.default_rng(12).normal(size=(15, 3))
    out = local_point_features(ad.Tape(), store, coords, neighbors=4, sa_dim=cfg.sa_dim)
    assert out.value.shape == (15, cfg.sa_dim)
