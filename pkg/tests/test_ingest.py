import json

import numpy as np
import pytest

from scanpathkit.core import Scanpath
from scanpathkit.ingest import (DatasetError, DatasetRecord, dump_dataset, length_stats,
                                load_dataset, load_image, load_saliency, resample_scanpath,
                                resize_bilinear, save_saliency, select_random_scanpath)

from oracles import population_std


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs))
    return path


def record(image_id, lengths, w=10, h=10):
    paths = tuple(Scanpath.from_points([(i / 40, 0.5) for i in range(n)], image_id, w, h)
                  for n in lengths)
    return DatasetRecord(image_id, w, h, paths)


class TestLoad:
    def test_single_line(self, tmp_path):
        p = write_lines(tmp_path / "d.jsonl", [
            {"image_id": "a", "width": 4, "height": 4,
             "scanpaths": [[[0.1, 0.2], [0.3, 0.4, 10], [0.5, 0.6, 20, 30]]]}])
        recs = load_dataset(p)
        assert len(recs) == 1 and len(recs[0].scanpaths) == 1
        fx = recs[0].scanpaths[0].fixations
        assert len(fx) == 3
        assert fx[1].t == 10 and fx[1].dur is None
        assert fx[2].t == 20 and fx[2].dur == 30

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        assert load_dataset(tmp_path / "e.jsonl") == []

    def test_pixel_origin0_out_of_bounds(self, tmp_path):
        p = write_lines(tmp_path / "d.jsonl", [
            {"image_id": "img7", "width": 640, "height": 480, "scanpaths": [[[640, 10]]]}])
        with pytest.raises(DatasetError, match="img7"):
            load_dataset(p, "pixel_origin0")

    def test_pixel_modes_normalize(self, tmp_path):
        p = write_lines(tmp_path / "d.jsonl", [
            {"image_id": "a", "width": 641, "height": 481, "scanpaths": [[[640, 0], [320, 240]]]}])
        xy = load_dataset(p, "pixel_origin0")[0].scanpaths[0].xy
        np.testing.assert_allclose(xy, [[1.0, 0.0], [0.5, 0.5]])
        p1 = write_lines(tmp_path / "d1.jsonl", [
            {"image_id": "a", "width": 641, "height": 481, "scanpaths": [[[641, 1], [321, 241]]]}])
        np.testing.assert_allclose(load_dataset(p1, "pixel_origin1")[0].scanpaths[0].xy, xy)
        with pytest.raises(DatasetError):
            write_lines(p1, [{"image_id": "a", "width": 641, "height": 481,
                              "scanpaths": [[[0, 1]]]}])
            load_dataset(p1, "pixel_origin1")

    def test_malformed_line_number(self, tmp_path):
        good = {"image_id": "a", "width": 4, "height": 4, "scanpaths": [[[0.1, 0.2]]]}
        p = tmp_path / "bad.jsonl"
        p.write_text(json.dumps(good) + "\n{not json\n")
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(p)

    @pytest.mark.parametrize("obj", [
        {"image_id": "a", "width": 4, "height": 4, "scanpaths": []},
        {"image_id": "a", "width": 0, "height": 4, "scanpaths": [[[0.1, 0.2]]]},
        {"image_id": "a", "width": 4, "height": 4, "scanpaths": [[[0.1]]]},
        {"image_id": "a", "width": 4, "height": 4, "scanpaths": [[["x", 0.2]]]},
        {"width": 4, "height": 4, "scanpaths": [[[0.1, 0.2]]]},
    ])
    def test_schema_errors(self, tmp_path, obj):
        with pytest.raises(DatasetError, match="line 1"):
            load_dataset(write_lines(tmp_path / "d.jsonl", [obj]))

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        objs = [{"image_id": f"im{k}", "width": 32, "height": 24,
                 "scanpaths": [[[float(x), float(y)] for x, y in rng.random((5, 2))],
                               [[0.25, 0.5, 0.0, 120.0], [1.0, 0.0, 130.0, 80.0]]],
                 "saliency": f"maps/im{k}.pgm"} for k in range(3)]
        src = write_lines(tmp_path / "src.jsonl", objs)
        first = load_dataset(src)
        dump_dataset(first, tmp_path / "a.jsonl")
        again = load_dataset(tmp_path / "a.jsonl")
        assert again == first
        dump_dataset(again, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "a.jsonl").read_bytes() == src.read_bytes()


class TestSaliencyFiles:
    def test_text_grid(self, tmp_path):
        p = tmp_path / "s.txt"
        p.write_text("3 2\n0 1 2\n3 4 5.5\n")
        np.testing.assert_array_equal(load_saliency(p).values, [[0, 1, 2], [3, 4, 5.5]])

    def test_text_grid_size_mismatch(self, tmp_path):
        p = tmp_path / "s.txt"
        p.write_text("3 2\n0 1 2\n")
        with pytest.raises(ValueError):
            load_saliency(p)

    def test_pgm_8bit(self, tmp_path):
        p = tmp_path / "s.pgm"
        p.write_bytes(b"P5\n# comment\n3 2\n255\n" + bytes([0, 10, 255, 1, 2, 3]))
        np.testing.assert_array_equal(load_saliency(p).values, [[0, 10, 255], [1, 2, 3]])

    def test_pgm_16bit_big_endian(self, tmp_path):
        p = tmp_path / "s.pgm"
        p.write_bytes(b"P5 2 1 65535\n" + bytes([0x01, 0x00, 0xFF, 0xFF]))
        np.testing.assert_array_equal(load_saliency(p).values, [[256, 65535]])

    def test_save_load(self, tmp_path):
        grid = np.random.default_rng(0).random((4, 5))
        save_saliency(grid, tmp_path / "g.txt")
        np.testing.assert_array_equal(load_saliency(tmp_path / "g.txt").values, grid)
        save_saliency(grid, tmp_path / "g.pgm")
        back = load_saliency(tmp_path / "g.pgm").values
        np.testing.assert_allclose(back / 65535, grid / grid.max(), atol=1e-5)


def test_resize_bilinear_constant_and_identity():
    img = np.random.default_rng(1).random((6, 8, 3))
    np.testing.assert_array_equal(resize_bilinear(img, 6, 8), img)
    flat = np.full((5, 7, 3), 0.25)
    np.testing.assert_allclose(resize_bilinear(flat, 11, 3), 0.25)


def test_load_image_npy(tmp_path):
    arr = np.random.default_rng(2).random((8, 8, 3))
    np.save(tmp_path / "im.npy", arr)
    out = load_image(tmp_path / "im.npy", 4, 4)
    assert out.shape == (3, 4, 4)
    # 2x downscale with half-pixel centers averages 2x2 blocks
    np.testing.assert_allclose(out[:, 0, 0], arr[:2, :2].mean(axis=(0, 1)))


class TestLengthStats:
    def test_single(self):
        s = length_stats([record("a", [5])])
        assert (s.min, s.max, s.mean, s.median, s.mode, s.std, s.count) == (5, 5, 5, 5, 5, 0, 1)
        assert s.mode_share == 1.0

    def test_small_multiset(self):
        lengths = [2, 3, 3, 8]
        s = length_stats([record("a", [2, 3]), record("b", [3, 8])])
        assert s.mean == 4.0 and s.median == 3 and s.mode == 3 and s.mode_share == 0.5
        assert s.count == 4
        assert s.std == pytest.approx(population_std(lengths), abs=1e-12)
        assert s.std == pytest.approx(2.3452, abs=1e-4)

    def test_reorder_invariant(self):
        recs = [record("a", [1, 7, 7]), record("b", [4, 2]), record("c", [9])]
        s1 = length_stats(recs)
        s2 = length_stats([record("c", [9]), record("b", [2, 4]), record("a", [7, 1, 7])])
        assert s1 == s2

    def test_mode_tie_smallest(self):
        assert length_stats([record("a", [4, 4, 2, 2, 9])]).mode == 2

    def test_empty(self):
        with pytest.raises(ValueError, match="empty dataset"):
            length_stats([])


class TestSelection:
    def test_single(self):
        rec = record("a", [3])
        assert select_random_scanpath(rec, 123) is rec.scanpaths[0]

    def test_deterministic(self):
        rec = record("a", [2, 3, 4])
        assert select_random_scanpath(rec, 9) is select_random_scanpath(rec, 9)

    def test_uniform(self):
        rec = record("img", [2, 3, 4])
        counts = [0, 0, 0]
        for seed in range(10000):
            counts[rec.scanpaths.index(select_random_scanpath(rec, seed))] += 1
        assert all(abs(c - 3330) <= 200 for c in counts), counts


class TestResample:
    def test_truncate(self):
        s = Scanpath.from_points([(i / 10, 0) for i in range(10)])
        assert resample_scanpath(s, 8).fixations == s.fixations[:8]

    def test_pad(self):
        s = Scanpath.from_points([(0.1, 0.1), (0.2, 0.2), (0.3, 0.3)])
        a, b, c = s.fixations
        assert resample_scanpath(s, 5).fixations == (a, b, c, c, c)

    def test_identity(self):
        s = Scanpath.from_points([(i / 8, 0.5) for i in range(8)])
        assert resample_scanpath(s, 8) == s
