import numpy as np
import pytest
from hypothesis import given, strategies as st

from scanpathkit.core import (Fixation, FixationMap, SaliencyMap, Scanpath, rasterize,
                              round_half_away, saccade_vectors)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
points = st.lists(st.tuples(unit, unit), min_size=1, max_size=20)


def sp(*pts):
    return Scanpath.from_points(pts)


def test_fixation_bounds():
    with pytest.raises(ValueError):
        Fixation(1.01, 0.5)
    with pytest.raises(ValueError):
        Fixation(0.5, 0.5, dur=-1.0)


def test_empty_scanpath_rejected():
    with pytest.raises(ValueError, match="empty scanpath"):
        Scanpath(())


def test_timestamps_must_not_decrease():
    with pytest.raises(ValueError):
        Scanpath((Fixation(0.1, 0.1, t=100.0, dur=50.0), Fixation(0.2, 0.2, t=90.0, dur=50.0)))
    # without durations the ordering rule does not apply
    Scanpath((Fixation(0.1, 0.1, t=100.0), Fixation(0.2, 0.2, t=90.0)))


def test_saliency_map_validation():
    with pytest.raises(ValueError):
        SaliencyMap([[0.0, -1.0]])
    with pytest.raises(ValueError):
        SaliencyMap([[0.0, np.nan]])
    assert SaliencyMap([[1, 2, 3]]).shape == (1, 3)


def test_fixation_map_is_binary():
    with pytest.raises(ValueError):
        FixationMap(np.array([[0, 2]]))


def test_round_half_away_from_zero():
    np.testing.assert_array_equal(round_half_away([0.5, 1.5, 2.5, 0.49, -0.5]), [1, 2, 3, 0, -1])


class TestRasterize:
    def test_corner(self):
        m = rasterize(sp((0, 0)), 2, 2)
        np.testing.assert_array_equal(m.cells, [[1, 0], [0, 0]])

    def test_opposite_corners(self):
        m = rasterize(sp((0, 0), (1, 1)), 3, 3)
        np.testing.assert_array_equal(m.cells, [[1, 0, 0], [0, 0, 0], [0, 0, 1]])

    def test_duplicates_collapse(self):
        m = rasterize(sp((0.5, 0.5), (0.5, 0.5)), 3, 3)
        assert m.count == 1 and m.cells[1, 1] == 1

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            rasterize(sp((0, 0)), 0, 3)

    @given(points, st.integers(1, 12), st.integers(1, 12), st.randoms())
    def test_permutation_invariant(self, pts, gw, gh, rnd):
        shuffled = list(pts)
        rnd.shuffle(shuffled)
        a = rasterize(Scanpath.from_points(pts), gw, gh).cells
        b = rasterize(Scanpath.from_points(shuffled), gw, gh).cells
        np.testing.assert_array_equal(a, b)

    @given(points, st.integers(1, 12), st.integers(1, 12))
    def test_set_cell_count_bounds(self, pts, gw, gh):
        assert 1 <= rasterize(Scanpath.from_points(pts), gw, gh).count <= len(pts)


class TestSaccades:
    def test_single(self):
        assert saccade_vectors(sp((0, 0), (1, 0))) == [(1, 0)]

    def test_zero_saccade_kept(self):
        assert saccade_vectors(sp((0.5, 0.5), (0.5, 0.5))) == [(0, 0)]

    def test_subtraction(self):
        got = saccade_vectors(sp((0, 0), (0.3, 0.4), (0.3, 0.9)))
        np.testing.assert_allclose(got, [(0.3, 0.4), (0.0, 0.5)], atol=1e-15)

    def test_needs_two_fixations(self):
        with pytest.raises(ValueError, match="no saccades"):
            saccade_vectors(sp((0.1, 0.1)))

    @given(st.lists(st.tuples(unit, unit), min_size=2, max_size=30))
    def test_telescoping(self, pts):
        vecs = np.array(saccade_vectors(Scanpath.from_points(pts)))
        total = vecs.sum(axis=0)
        expected = np.subtract(pts[-1], pts[0])
        np.testing.assert_allclose(total, expected, atol=1e-12)
