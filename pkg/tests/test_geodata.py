"""World files, raster I/O, rasterization, tiling and stitching."""

import numpy as np
import pytest

from wetlandseg.errors import DataError, ShapeError
from wetlandseg.geodata import (
    GeoRaster,
    GeoTransform,
    extract_window,
    plan_tiles,
    rasterize_polygons,
    read_probability_raster,
    read_raster,
    read_world_file,
    stitch,
    write_probability_raster,
    write_raster,
    write_world_file,
)
from wetlandseg.postproc import Feature, VectorLayer


def square(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


class TestWorldFile:
    def test_convention(self, tmp_path):
        path = tmp_path / "map.wld"
        path.write_text("5.0\n0\n0\n-5.0\n100.0\n200.0\n")
        t = read_world_file(path)
        assert t.pixel_center(0, 0) == (100.0, 200.0)
        assert t.pixel_center(1, 1) == (105.0, 195.0)

    def test_round_trip(self, tmp_path):
        t = GeoTransform(12.5, -3.25, 2.5, 2.5)
        path = tmp_path / "x.wld"
        write_world_file(path, t)
        back = read_world_file(path)
        assert (back.origin_x, back.origin_y) == (12.5, -3.25)
        assert (back.pixel_size_x, back.pixel_size_y) == (2.5, 2.5)

    def test_rotation_rejected(self, tmp_path):
        path = tmp_path / "rot.wld"
        path.write_text("5.0\n0.1\n0\n-5.0\n0\n0\n")
        with pytest.raises(DataError, match="rotation"):
            read_world_file(path)

    def test_wrong_line_count(self, tmp_path):
        path = tmp_path / "short.wld"
        path.write_text("5.0\n0\n0\n")
        with pytest.raises(DataError, match="6"):
            read_world_file(path)

    def test_pixel_mapping_inverts_exactly(self):
        t = GeoTransform(1000.0, 2000.0, 5.0, 5.0)
        for row in range(0, 50, 7):
            for col in range(0, 50, 7):
                x, y = t.pixel_center(row, col)
                assert t.to_pixel(x, y) == (float(row), float(col))


class TestRasterIO:
    def test_rgb_round_trip(self, tmp_path, rng):
        values = rng.integers(0, 256, size=(3, 6, 7), dtype=np.uint8)
        raster = GeoRaster(values, GeoTransform(0.0, 0.0, 1.0, 1.0))
        write_raster(tmp_path / "img.png", raster)
        back = read_raster(tmp_path / "img.png")
        assert np.array_equal(back.values, values)
        assert back.transform.pixel_size_x == 1.0

    def test_probability_round_trip_quantized(self, tmp_path, rng):
        prob = rng.random((1, 5, 5)).astype(np.float32)
        raster = GeoRaster(prob, GeoTransform(10.0, 20.0, 5.0, 5.0))
        write_probability_raster(tmp_path / "p.png", raster)
        back = read_probability_raster(tmp_path / "p.png")
        assert np.abs(back.values - prob).max() <= 0.5 / 65535 + 1e-7

    def test_bad_png_rejected(self, tmp_path):
        (tmp_path / "junk.png").write_bytes(b"not a png")
        write_world_file(tmp_path / "junk.wld", GeoTransform(0, 0, 1, 1))
        with pytest.raises(DataError, match="decode"):
            read_raster(tmp_path / "junk.png")


class TestRasterize:
    def test_aligned_square_covers_exact_block(self):
        # transform: pixel centers at x = 0, 5, 10, ... ; square spans the
        # outer edges of pixels (1..2, 1..2)
        t = GeoTransform(0.0, 50.0, 5.0, 5.0)
        layer = VectorLayer([Feature(square(2.5, 37.5, 12.5, 47.5), [], 100.0)])
        out = rasterize_polygons(layer, t, (4, 4))
        expected = np.zeros((4, 4), np.uint8)
        expected[1:3, 1:3] = 1
        assert np.array_equal(out.labels, expected)
        assert out.validity.all()

    def test_hole_subtracts(self):
        t = GeoTransform(0.0, 50.0, 5.0, 5.0)
        outer = square(-2.5, 27.5, 22.5, 52.5)   # 5x5 pixel block
        hole = square(7.5, 37.5, 12.5, 42.5)     # center pixel
        layer = VectorLayer([Feature(outer, [hole], 600.0)])
        out = rasterize_polygons(layer, t, (5, 5))
        assert out.labels.sum() == 24
        assert out.labels[2, 2] == 0

    def test_degenerate_ring_rejected(self):
        t = GeoTransform(0.0, 10.0, 1.0, 1.0)
        bad = [(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)]
        layer = VectorLayer([Feature(square(0, 0, 5, 5), [], 25.0),
                             Feature(bad, [], 0.0)])
        with pytest.raises(DataError, match="feature 1"):
            rasterize_polygons(layer, t, (10, 10))


class TestPlanTiles:
    def test_240_by_160(self):
        plan = plan_tiles((240, 160), core=80, halo=21)
        assert len(plan.origins) == 6
        assert plan.origins == ((0, 0), (0, 80), (80, 0), (80, 80), (160, 0), (160, 80))
        assert 80 + 2 * plan.pad == 122

    def test_exact_fit_single_core(self):
        plan = plan_tiles((80, 80), core=80, halo=21)
        assert plan.origins == ((0, 0),)

    def test_inward_shift(self):
        plan = plan_tiles((100, 80), core=80, halo=21)
        assert plan.origins == ((0, 0), (20, 0))

    def test_coverage_is_exhaustive(self, rng):
        for _ in range(25):
            rows = int(rng.integers(1, 400))
            cols = int(rng.integers(1, 400))
            plan = plan_tiles((rows, cols), core=80, halo=0)
            core_r, core_c = plan.core_dims()
            covered = np.zeros((rows, cols), dtype=int)
            for r0, c0 in plan.origins:
                covered[r0:r0 + core_r, c0:c0 + core_c] += 1
            assert (covered >= 1).all()


class TestExtractWindow:
    def test_interior_is_plain_crop(self, rng):
        values = rng.integers(0, 256, size=(3, 40, 40), dtype=np.uint8)
        win = extract_window(values, (10, 12), (8, 8), pad=4)
        expected = values[:, 6:22, 8:24].astype(np.float32) / 255.0
        assert np.array_equal(win, expected)

    def test_corner_reflection(self):
        values = np.arange(25, dtype=np.uint8).reshape(1, 5, 5)
        win = extract_window(values, (0, 0), (2, 2), pad=2)
        scaled = values[0].astype(np.float32) / 255.0
        # mirrored at the boundary: row -1 equals row 0, row -2 equals row 1
        assert np.array_equal(win[0, 2:, 2:], scaled[:4, :4])
        assert np.array_equal(win[0, 1, 2:], scaled[0, :4])
        assert np.array_equal(win[0, 0, 2:], scaled[1, :4])
        assert np.array_equal(win[0, 2:, 1], scaled[:4, 0])

    def test_constant_raster_stays_constant(self):
        values = np.full((3, 30, 30), 77, dtype=np.uint8)
        win = extract_window(values, (0, 28), (2, 2), pad=5)
        assert np.all(win == np.float32(77 / 255.0))

    def test_float_input_not_rescaled(self):
        values = np.full((1, 10, 10), 0.25, dtype=np.float32)
        win = extract_window(values, (4, 4), (2, 2), pad=1)
        assert np.all(win == 0.25)


class TestStitch:
    def test_single_tile_identity(self, rng):
        t = GeoTransform(0, 0, 1, 1)
        plan = plan_tiles((80, 80), core=80, halo=0)
        tile = rng.random((80, 80)).astype(np.float32)
        out = stitch({(0, 0): tile}, plan, t)
        assert np.array_equal(out.values[0], tile)

    def test_two_tiles_concatenate(self, rng):
        t = GeoTransform(0, 0, 1, 1)
        plan = plan_tiles((80, 160), core=80, halo=0)
        left = rng.random((80, 80)).astype(np.float32)
        right = rng.random((80, 80)).astype(np.float32)
        out = stitch({(0, 0): left, (0, 80): right}, plan, t)
        assert np.array_equal(out.values[0], np.concatenate([left, right], axis=1))

    def test_extract_stitch_round_trip(self, rng):
        t = GeoTransform(0, 0, 1, 1)
        prob = rng.random((1, 173, 209)).astype(np.float32)
        plan = plan_tiles((173, 209), core=80, halo=0)
        core_r, core_c = plan.core_dims()
        tiles = {
            origin: extract_window(prob, origin, (core_r, core_c), pad=0)[0]
            for origin in plan.origins
        }
        out = stitch(tiles, plan, t)
        assert np.array_equal(out.values[0], prob[0])

    def test_missing_core_named(self, rng):
        t = GeoTransform(0, 0, 1, 1)
        plan = plan_tiles((80, 160), core=80, halo=0)
        with pytest.raises(DataError, match=r"\(0, 80\)"):
            stitch({(0, 0): np.zeros((80, 80))}, plan, t)
