import math

import numpy as np
import pytest

from scanpathkit.core import FixationMap, Scanpath, rasterize
from scanpathkit.metrics import (DegenerateMapError, align, congruency, multimatch,
                                 normalize_saliency, nss, otsu_threshold)

from oracles import brute_force_alignment_cost, brute_force_otsu, monotone_paths

SQRT2 = math.sqrt(2)


def sp(*pts, durations=None):
    return Scanpath.from_points(pts, durations=durations)


def random_scanpath(rng, n=None):
    n = n or int(rng.integers(2, 12))
    return Scanpath.from_points(rng.random((n, 2)))


class TestNormalize:
    def test_two_level(self):
        np.testing.assert_allclose(normalize_saliency([[0, 0], [2, 2]]), [[-1, -1], [1, 1]])

    def test_row(self):
        r = math.sqrt(1.5)
        np.testing.assert_allclose(normalize_saliency([[0, 1, 2]]), [[-r, 0, r]], atol=1e-12)

    def test_moments(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = normalize_saliency(rng.random((7, 9)) * 10)
            assert abs(p.mean()) < 1e-9 and abs(p.std() - 1) < 1e-9

    def test_constant(self):
        with pytest.raises(DegenerateMapError, match="degenerate"):
            normalize_saliency(np.full((3, 3), 0.1))


class TestNSS:
    def test_positive_cells(self):
        fm = FixationMap(np.array([[0, 0], [1, 1]]))
        assert nss([[0, 0], [2, 2]], fm) == pytest.approx(1.0, abs=1e-12)

    def test_all_fixated_is_zero(self):
        s = np.random.default_rng(1).random((5, 5))
        assert abs(nss(s, FixationMap(np.ones((5, 5), dtype=int)))) < 1e-9

    def test_row_example(self):
        fm = FixationMap(np.array([[0, 0, 1]]))
        assert nss([[0, 1, 2]], fm) == pytest.approx(math.sqrt(1.5), abs=1e-12)

    def test_affine_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            s = rng.random((6, 6))
            fm = rasterize(random_scanpath(rng), 6, 6)
            alpha, beta = rng.uniform(0.1, 50), rng.uniform(0, 10)
            assert abs(nss(alpha * s + beta, fm) - nss(s, fm)) < 1e-9

    def test_errors(self):
        with pytest.raises(ValueError, match="shape"):
            nss(np.ones((2, 3)) * [1, 2, 3], FixationMap(np.ones((2, 2), dtype=int)))
        with pytest.raises(ValueError):
            nss([[0, 1]], FixationMap(np.zeros((1, 2), dtype=int)))
        with pytest.raises(DegenerateMapError):
            nss([[1, 1]], FixationMap(np.ones((1, 2), dtype=int)))


class TestOtsu:
    def test_bimodal(self):
        s = np.zeros((8, 8))
        s[:, 4:] = 255
        t = otsu_threshold(s)
        assert 0 < t < 255
        assert (s > t).sum() == 32

    def test_constant(self):
        s = np.full((4, 4), 7.0)
        t = otsu_threshold(s)
        assert t == 7.0 and (s > t).sum() == 0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            s = rng.integers(0, 256, size=(16, 16)).astype(float)
            assert otsu_threshold(s) == brute_force_otsu(s)

    def test_matches_brute_force_real_valued_and_few_bins(self):
        rng = np.random.default_rng(5)
        for bins in (2, 7, 32):
            s = rng.gamma(2.0, size=(12, 12))
            # real-valued sums may round differently; compare the partition quality
            t, tb = otsu_threshold(s, bins), brute_force_otsu(s, bins)
            assert np.array_equal(s > t, s > tb) or abs(t - tb) < 1e-12


class TestCongruency:
    def test_extremes(self):
        s = np.zeros((4, 4))
        s[:2, :2] = 1.0
        on = sp((0, 0), (1 / 3, 1 / 3))
        off = sp((1, 1), (2 / 3, 1))
        assert congruency(s, on) == 1.0
        assert congruency(s, off) == 0.0

    def test_half(self):
        s = np.array([[9, 9, 0, 0],
                      [9, 9, 0, 0],
                      [0, 0, 0, 1],
                      [0, 0, 1, 2]], dtype=float)
        t = brute_force_otsu(s)
        assert (s > t).sum() == 4  # only the 9s are salient
        path = sp((0, 0), (1, 1), (1 / 3, 0), (2 / 3, 2 / 3))
        assert congruency(s, path) == 0.5

    def test_duplicates_count(self):
        s = np.zeros((3, 3))
        s[1, 1] = 1.0
        assert congruency(s, sp((0.5, 0.5), (0.5, 0.5), (0, 0))) == pytest.approx(2 / 3)

    def test_adding_salient_fixation_never_decreases(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            s = rng.random((8, 8))
            path = random_scanpath(rng)
            rows, cols = np.nonzero(s > otsu_threshold(s))
            k = rng.integers(len(rows))
            extra = (cols[k] / 7, rows[k] / 7)
            longer = Scanpath.from_points(list(map(tuple, path.xy)) + [extra])
            c0, c1 = congruency(s, path), congruency(s, longer)
            assert 0 <= c0 <= 1 and c1 >= c0
            assert c1 == pytest.approx((c0 * len(path) + 1) / (len(path) + 1))


class TestAlign:
    def test_identical_is_diagonal(self):
        a = [(0.1, 0.2), (0.3, -0.1), (0.0, 0.0), (0.3, -0.1)]
        al = align(a, a)
        assert al.pairs == tuple((i, i) for i in range(4)) and al.cost == 0.0

    def test_single_vs_many(self):
        al = align([(0.1, 0.1)], [(0.2, 0.0)] * 5)
        assert al.pairs == tuple((0, j) for j in range(5))

    def test_lattice_invariants(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = rng.normal(size=(rng.integers(1, 7), 2))
            b = rng.normal(size=(rng.integers(1, 7), 2))
            pairs = align(a, b).pairs
            assert pairs[0] == (0, 0) and pairs[-1] == (len(a) - 1, len(b) - 1)
            for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
                assert (i1 - i0, j1 - j0) in ((1, 1), (1, 0), (0, 1))

    def test_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            a = rng.normal(size=(rng.integers(1, 5), 2)).tolist()
            b = rng.normal(size=(rng.integers(1, 5), 2)).tolist()
            assert align(a, b).cost == brute_force_alignment_cost(a, b)

    def test_path_enumerator_counts(self):
        # Delannoy numbers D(2,2)=13, D(3,3)=63
        assert len(list(monotone_paths(3, 3))) == 13
        assert len(list(monotone_paths(4, 4))) == 63

    def test_empty(self):
        with pytest.raises(ValueError):
            align([], [(0, 0)])


class TestMultiMatch:
    def test_identity(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = random_scanpath(rng)
            r = multimatch(a, a)
            assert (r.shape, r.direction, r.length, r.position, r.score) == (1, 1, 1, 1, 1)
            assert r.duration is None

    def test_translation(self):
        a = sp((0.1, 0.2), (0.5, 0.6), (0.3, 0.9), (0.8, 0.1))
        b = Scanpath.from_points(a.xy + [0.1, 0.0])
        r = multimatch(a, b)
        assert r.shape == pytest.approx(1.0, abs=1e-12)
        assert r.direction == pytest.approx(1.0, abs=1e-12)
        assert r.length == pytest.approx(1.0, abs=1e-12)
        assert r.position == pytest.approx(1 - 0.1 / SQRT2, abs=1e-12)
        assert r.score == pytest.approx((3 + 1 - 0.1 / SQRT2) / 4, abs=1e-12)
        assert r.position == pytest.approx(0.9293, abs=1e-4)
        assert r.score == pytest.approx(0.9823, abs=1e-4)

    def test_perpendicular_unit_saccades(self):
        r = multimatch(sp((0, 0), (1, 0)), sp((0, 0), (0, 1)))
        assert r.direction == pytest.approx(0.5, abs=1e-12)
        assert r.length == pytest.approx(1.0, abs=1e-12)
        assert r.shape == pytest.approx(0.5, abs=1e-12)
        assert r.position == pytest.approx(0.0, abs=1e-12)
        assert r.score == pytest.approx(0.5, abs=1e-12)

    def test_opposite_direction(self):
        r = multimatch(sp((0, 0.5), (1, 0.5)), sp((1, 0.5), (0, 0.5)))
        assert r.direction == pytest.approx(0.0, abs=1e-12)
        assert r.shape == pytest.approx(1 - 2 / (2 * SQRT2), abs=1e-12)

    def test_zero_saccade_direction(self):
        r = multimatch(sp((0.5, 0.5), (0.5, 0.5)), sp((0, 0), (1, 0)))
        assert r.direction == 1.0

    def test_duration(self):
        a = sp((0.1, 0.1), (0.9, 0.9), durations=[100.0, 200.0])
        b = sp((0.1, 0.1), (0.9, 0.9), durations=[300.0, 50.0])
        r = multimatch(a, b)
        # the single saccade starts at each path's first fixation
        assert r.duration == pytest.approx(1 - 200 / 300)
        assert r.score == pytest.approx(1.0)
        zero = sp((0.1, 0.1), (0.9, 0.9), durations=[0.0, 0.0])
        assert multimatch(zero, zero).duration == 1.0

    def test_components_bounded_and_symmetric(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            a, b = random_scanpath(rng), random_scanpath(rng)
            r, q = multimatch(a, b), multimatch(b, a)
            for v in (r.shape, r.direction, r.length, r.position, r.score):
                assert 0.0 <= v <= 1.0
            assert r.score == pytest.approx((r.shape + r.direction + r.length + r.position) / 4,
                                            abs=1e-15)
            assert abs(r.score - q.score) < 1e-9

    def test_too_short(self):
        with pytest.raises(ValueError):
            multimatch(sp((0.1, 0.1)), sp((0, 0), (1, 1)))
