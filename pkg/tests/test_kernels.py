"""Both kernel backends must return bitwise-identical results."""
import numpy as np
import pytest

from votetrack.kernels import active_backend, numpy_impl

numba_impl = pytest.importorskip("votetrack.kernels.numba_impl")


@pytest.fixture(scope="module")
def clouds():
    rng = np.random.default_rng(0)
    return [rng.normal(size=(n, 3)) * s for n, s in
            [(16, 1.0), (128, 3.0), (257, 0.2)]]


def test_backend_selected():
    assert active_backend() in ("numba", "numpy")


def test_pairwise_distances_agree(clouds):
    for coords in clouds:
        np.testing.assert_array_equal(numpy_impl.pairwise_distances(coords),
                                      numba_impl.pairwise_distances(coords))


def test_farthest_point_indices_agree(clouds):
    for coords in clouds:
        for count, start in [(1, 0), (5, 2), (len(coords), 0)]:
            np.testing.assert_array_equal(
                numpy_impl.farthest_point_indices(coords, count, start),
                numba_impl.farthest_point_indices(coords, count, start))


def test_farthest_point_indices_agree_with_duplicates():
    coords = np.zeros((9, 3))
    coords[4:] = 1.0
    np.testing.assert_array_equal(
        numpy_impl.farthest_point_indices(coords, 6, 0),
        numba_impl.farthest_point_indices(coords, 6, 0))


def test_box_frame_mask_agree(clouds):
    center = np.array([0.3, -0.1, 0.2])
    size = np.array([2.0, 1.0, 0.8])
    for coords in clouds:
        for yaw in (0.0, 0.7, -2.5):
            np.testing.assert_array_equal(
                numpy_impl.box_frame_mask(coords, center, size, yaw),
                numba_impl.box_frame_mask(coords, center, size, yaw))


def test_rect_intersection_area_agree():
    rng = np.random.default_rng(1)
    for _ in range(50):
        def rect():
            w, h = rng.uniform(0.5, 2.0, size=2)
            yaw = rng.uniform(-np.pi, np.pi)
            cx, cy = rng.uniform(-1, 1, size=2)
            local = np.array([[w, h], [-w, h], [-w, -h], [w, -h]])
            c, s = np.cos(yaw), np.sin(yaw)
            return local @ np.array([[c, s], [-s, c]]) + [cx, cy]

        a, b = rect(), rect()
        assert numpy_impl.rect_intersection_area(a, b) == \
            numba_impl.rect_intersection_area(a, b)
