import numpy as np
import pytest

import votetrack.autodiff as ad
from votetrack.attention import enhance_seeds
from votetrack.config import Config
from votetrack.errors import NumericError
from votetrack.geometry import Box3D
from votetrack.losses import make_training_target
from votetrack.network import build_model, compute_losses, forward
from votetrack.voting import vote


def tiny_config(**kw):
    base = dict(seed=0, n_template=32, n_search=64, n_seeds=16, feature_dim=8,
                attn_dim=4, sa_dim=6, sa_neighbors=4, sparse_samples=4,
                knn_samples=4, n_proposals=8)
    base.update(kw)
    return Config(**base).validate()


def make_scene(seed=0, n_template=32, n_search=64):
    rng = np.random.default_rng(seed)
    template = rng.normal(size=(n_template, 3)) * 0.4
    search = rng.normal(size=(n_search, 3)) * 1.2
    ref_box = Box3D(np.zeros(3), (1.2, 0.8, 0.6), 0.0)
    return template, search, ref_box


class TestForward:
    def test_shapes(self):
        cfg = tiny_config()
        store = build_model(cfg)
        template, search, ref = make_scene(1)
        res = forward(ad.Tape(), store, cfg, template, search, ref)
        assert res.seed_features.value.shape == (16, 8)
        assert res.enhanced.value.shape == (16, 8)
        assert res.importance.value.shape == (16,)
        assert res.vote_coords.value.shape == (16, 3)
        assert len(res.proposals) == 8
        assert res.scores.value.shape == (8,)
        assert res.refinements.value.shape == (8, 3)

    def test_component_switches(self):
        cfg = tiny_config(use_global=False, use_local=False, use_importance=False)
        store = build_model(cfg)
        template, search, ref = make_scene(2)
        res = forward(ad.Tape(), store, cfg, template, search, ref)
        assert res.importance is None
        assert res.enhanced is res.seed_features

    def test_switches_do_not_change_shared_init(self):
        a = build_model(tiny_config())
        b = build_model(tiny_config(use_global=False, use_importance=False))
        for name in a.names():
            np.testing.assert_array_equal(a[name].value, b[name].value)

    def test_seed_permutation_equivariance_through_votes(self):
        """Permuting the seed set permutes enhanced features and votes."""
        cfg = tiny_config()
        store = build_model(cfg)
        template, search, ref = make_scene(3)
        base = forward(ad.Tape(), store, cfg, template, search, ref)
        feats = base.seed_features.value
        coords = base.seed_coords
        perm = np.random.default_rng(4).permutation(len(coords))

        def run(f, c):
            tape = ad.Tape()
            enhanced, imp = enhance_seeds(tape, store, ad.constant(f), c,
                                          cfg.sparse_samples, cfg.knn_samples)
            vf, vc, off = vote(tape, store, enhanced, c)
            return enhanced.value, imp.value, vc.value

        e_a, i_a, v_a = run(feats, coords)
        e_b, i_b, v_b = run(feats[perm], coords[perm])
        np.testing.assert_allclose(e_b, e_a[perm], atol=1e-10)
        np.testing.assert_allclose(i_b, i_a[perm], atol=1e-10)
        np.testing.assert_allclose(v_b, v_a[perm], atol=1e-10)

    def test_forward_deterministic(self):
        cfg = tiny_config()
        store = build_model(cfg)
        template, search, ref = make_scene(5)
        a = forward(ad.Tape(), store, cfg, template, search, ref)
        b = forward(ad.Tape(), store, cfg, template, search, ref)
        np.testing.assert_array_equal(a.scores.value, b.scores.value)
        np.testing.assert_array_equal(a.vote_coords.value, b.vote_coords.value)


class TestComputeLosses:
    def test_breakdown_identity(self):
        cfg = tiny_config()
        store = build_model(cfg)
        template, search, ref = make_scene(6)
        tape = ad.Tape()
        res = forward(tape, store, cfg, template, search, ref)
        gt = Box3D((0.1, 0.05, 0.0), ref.size, 0.02)
        target = make_training_target(gt, res.seed_coords)
        total, b = compute_losses(tape, cfg, res, target)
        assert b.total == b.l_off + cfg.lambda_imp * b.l_imp \
            + cfg.lambda_score * b.l_score + cfg.lambda_center_rot * b.l_center_rot
        assert float(total.value) == b.total

    def test_importance_disabled_drops_term(self):
        cfg = tiny_config(use_importance=False)
        store = build_model(cfg)
        template, search, ref = make_scene(7)
        tape = ad.Tape()
        res = forward(tape, store, cfg, template, search, ref)
        gt = Box3D((0.1, 0.0, 0.0), ref.size, 0.0)
        target = make_training_target(gt, res.seed_coords)
        _, b = compute_losses(tape, cfg, res, target)
        assert b.l_imp == 0.0

    def test_gradients_flow_to_all_components(self):
        # generous radii and a roomy gt box so every loss term is active
        cfg = tiny_config(r_pos=2.0, r_neg=4.0)
        store = build_model(cfg)
        template, search, ref = make_scene(8)
        tape = ad.Tape()
        res = forward(tape, store, cfg, template, search, ref)
        gt = Box3D((0.05, 0.0, 0.0), (3.0, 3.0, 3.0), 0.01)
        target = make_training_target(gt, res.seed_coords)
        assert target.seed_labels.sum() > 0, "scene must produce positive seeds"
        total, _ = compute_losses(tape, cfg, res, target)
        store.zero_grad()
        tape.backward(total)
        prefixes = {"sa", "correlate", "global", "local", "importance", "vote",
                    "head_score", "head_yaw", "head_center"}
        touched = {p for p in prefixes
                   for name in store.names()
                   if name.startswith(p) and store[name].grad.any()}
        assert touched == prefixes
