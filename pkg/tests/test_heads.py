import numpy as np
import pytest

import votetrack.autodiff as ad
from votetrack.geometry import Box3D
from votetrack.heads import HeadOutput, assemble_box, predict, register_heads
from votetrack.gradcheck import check_gradients
from votetrack.nn import ParamStore
from votetrack.voting import ProposalSet

D = 6


def make_inputs(seed=0, m=10, k=4):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(m, D))
    coords = rng.normal(size=(m, 3))
    idx = np.arange(k) * (m // k)
    proposals = ProposalSet(centers=coords[idx].copy(), source_indices=idx)
    return feats, coords, proposals


def run_predict(store, feats, coords, proposals):
    tape = ad.Tape()
    s, y, r, _ = predict(tape, store, ad.constant(feats), ad.constant(coords), proposals)
    return s.value, y.value, r.value


class TestPredict:
    def test_zero_weights_give_neutral_outputs(self):
        store = ParamStore(1)
        register_heads(store, D)
        for name in store.names():
            if name.endswith(("norm_g",)) or ".ng" in name:
                continue
            store[name].value[...] = 0.0
        feats, coords, proposals = make_inputs(2)
        scores, yaws, refinements = run_predict(store, feats, coords, proposals)
        np.testing.assert_array_equal(scores, np.full(4, 0.5))
        np.testing.assert_array_equal(yaws, np.zeros(4))
        np.testing.assert_array_equal(refinements, np.zeros((4, 3)))

    def test_heads_are_decoupled(self):
        store = ParamStore(3)
        register_heads(store, D)
        feats, coords, proposals = make_inputs(4)
        _, yaws_a, refine_a = run_predict(store, feats, coords, proposals)
        scores_a = run_predict(store, feats, coords, proposals)[0]
        for name in store.names():
            if name.startswith("head_score"):
                store[name].value += 0.37
        scores_b, yaws_b, refine_b = run_predict(store, feats, coords, proposals)
        np.testing.assert_array_equal(yaws_a, yaws_b)
        np.testing.assert_array_equal(refine_a, refine_b)
        assert not np.allclose(scores_a, scores_b)

    def test_no_shared_parameters(self):
        store = ParamStore(5)
        register_heads(store, D)
        names = store.names()
        by_head = {h: [n for n in names if n.startswith(h)]
                   for h in ("head_score", "head_yaw", "head_center")}
        assert sum(len(v) for v in by_head.values()) == len(names)

    def test_gradients_all_three_heads(self):
        store = ParamStore(6)
        register_heads(store, D)
        feats, coords, proposals = make_inputs(7, m=8, k=3)
        proj = np.random.default_rng(8).normal(size=(3, 5))

        def build(tape):
            s, y, r, _ = predict(tape, store, ad.constant(feats),
                                 ad.constant(coords), proposals)
            stacked = ad.concat(tape, [
                ad.reshape(tape, s, (3, 1)), ad.reshape(tape, y, (3, 1)), r], axis=1)
            return ad.sum_all(tape, ad.mul_const(tape, stacked, proj))

        def backward_fn():
            tape = ad.Tape()
            tape.backward(build(tape))

        check_gradients(lambda: float(build(ad.Tape()).value), backward_fn, store)


class TestAssembleBox:
    def test_single_proposal(self):
        proposals = ProposalSet(centers=np.array([[1.0, 2.0, 3.0]]),
                                source_indices=np.array([0]))
        out = HeadOutput(scores=np.array([0.01]), yaws=np.array([0.3]),
                         refinements=np.array([[0.1, 0.0, -0.1]]))
        box = assemble_box(out, proposals, template_size=np.array([2.0, 1.0, 1.5]))
        np.testing.assert_allclose(box.center, [1.1, 2.0, 2.9])
        assert box.yaw == pytest.approx(0.3)
        np.testing.assert_array_equal(box.size, [2.0, 1.0, 1.5])

    def test_argmax_picks_highest_score(self):
        proposals = ProposalSet(centers=np.zeros((2, 3)) + [[0, 0, 0], [5, 5, 5]],
                                source_indices=np.array([0, 1]))
        out = HeadOutput(scores=np.array([0.9, 0.2]), yaws=np.zeros(2),
                         refinements=np.zeros((2, 3)))
        box = assemble_box(out, proposals, np.ones(3))
        np.testing.assert_array_equal(box.center, [0, 0, 0])

    def test_monotone_score_transform_keeps_choice(self):
        rng = np.random.default_rng(9)
        k = 6
        proposals = ProposalSet(centers=rng.normal(size=(k, 3)),
                                source_indices=np.arange(k))
        scores = rng.uniform(0.05, 0.95, size=k)
        out_a = HeadOutput(scores=scores, yaws=np.zeros(k), refinements=np.zeros((k, 3)))
        out_b = HeadOutput(scores=scores ** 3, yaws=np.zeros(k),
                           refinements=np.zeros((k, 3)))
        a = assemble_box(out_a, proposals, np.ones(3))
        b = assemble_box(out_b, proposals, np.ones(3))
        np.testing.assert_array_equal(a.center, b.center)

    def test_size_always_copied_from_template(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            k = 3
            proposals = ProposalSet(centers=rng.normal(size=(k, 3)),
                                    source_indices=np.arange(k))
            out = HeadOutput(scores=rng.uniform(0.1, 0.9, k), yaws=rng.normal(size=k),
                             refinements=rng.normal(size=(k, 3)))
            size = rng.uniform(0.5, 3.0, size=3)
            box = assemble_box(out, proposals, size)
            np.testing.assert_array_equal(box.size, size)

    def test_empty_proposals_rejected(self):
        out = HeadOutput(scores=np.zeros(0), yaws=np.zeros(0),
                         refinements=np.zeros((0, 3)))
        proposals = ProposalSet(centers=np.zeros((0, 3)),
                                source_indices=np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            assemble_box(out, proposals, np.ones(3))


def test_tie_breaks_to_lowest_index():
    proposals = ProposalSet(centers=np.array([[1.0, 0, 0], [2.0, 0, 0]]),
                            source_indices=np.array([0, 1]))
    out = HeadOutput(scores=np.array([0.7, 0.7]), yaws=np.zeros(2),
                     refinements=np.zeros((2, 3)))
    box = assemble_box(out, proposals, np.ones(3))
    np.testing.assert_array_equal(box.center, [1.0, 0, 0])
