"""Fold geometry: partition properties and assignment rules."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wetlandseg.errors import DataError
from wetlandseg.folds import assign_fold, fold_spec_from_dict, fold_spec_to_dict, make_folds


class TestMakeFolds:
    def test_300_square_cell_sizes(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        widths = sorted({(r.x_max - r.x_min, r.y_max - r.y_min) for r in spec.regions})
        assert widths == [(100.0, 50.0), (100.0, 100.0)]
        halves = [r for r in spec.regions if r.y_max - r.y_min == 50.0]
        assert [r.fold for r in halves] == [4, 5]
        # center split ordered (north, south)
        assert halves[0].y_min == 150.0 and halves[1].y_max == 150.0

    def test_ten_regions(self):
        spec = make_folds((5.0, -10.0, 35.0, 20.0))
        assert sorted(r.fold for r in spec.regions) == list(range(10))

    def test_zero_area_rejected(self):
        with pytest.raises(DataError, match="zero-area"):
            make_folds((0.0, 0.0, 0.0, 10.0))

    def test_vertical_split_axis(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0), split_axis="vertical")
        halves = [r for r in spec.regions if r.fold in (4, 5)]
        assert all(r.x_max - r.x_min == 50.0 for r in halves)

    def test_corners_fall_in_exactly_one_region(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        for corner in [(0, 0), (300, 0), (0, 300), (300, 300)]:
            hits = [r.fold for r in spec.regions if spec.contains(r, *corner)]
            assert len(hits) == 1

    def test_area_sum_is_exact(self):
        spec = make_folds((0.125, -7.5, 1003.25, 400.0))
        total = sum(
            (Fraction(r.x_max) - Fraction(r.x_min)) * (Fraction(r.y_max) - Fraction(r.y_min))
            for r in spec.regions
        )
        x0, y0, x1, y1 = spec.extent
        assert total == (Fraction(x1) - Fraction(x0)) * (Fraction(y1) - Fraction(y0))

    def test_json_round_trip(self):
        spec = make_folds((1.0, 2.0, 31.0, 47.0))
        assert fold_spec_from_dict(fold_spec_to_dict(spec)) == spec


class TestAssignFold:
    def test_center_north(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        assert assign_fold(spec, 150.0, 160.0) == 4

    def test_origin_is_fold_zero(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        assert assign_fold(spec, 0.0, 0.0) == 0

    def test_outside_extent_rejected(self):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        with pytest.raises(DataError, match="outside"):
            assign_fold(spec, -1.0, 5.0)

    def test_random_sweep_single_membership(self, rng):
        spec = make_folds((0.0, 0.0, 300.0, 300.0))
        xs = rng.uniform(0, 300, size=10_000)
        ys = rng.uniform(0, 300, size=10_000)
        for x, y in zip(xs, ys):
            hits = [r.fold for r in spec.regions if spec.contains(r, x, y)]
            assert len(hits) == 1

    def test_translation_invariance(self, rng):
        # points sampled away from region edges; exactly-on-edge points can
        # flip sides by one ulp under translation
        base = make_folds((0.0, 0.0, 90.0, 90.0))
        offset = 1037.25
        moved = make_folds((offset, offset, 90.0 + offset, 90.0 + offset))
        for _ in range(500):
            x = float(rng.uniform(1.0, 89.0))
            y = float(rng.uniform(1.0, 89.0))
            if min(x % 30, 30 - x % 30, y % 30, 30 - y % 30) < 0.01:
                continue
            assert assign_fold(base, x, y) == assign_fold(moved, x + offset, y + offset)


@settings(max_examples=200, deadline=None)
@given(
    x0=st.floats(-1e6, 1e6),
    y0=st.floats(-1e6, 1e6),
    width=st.floats(1.0, 1e6),
    height=st.floats(1.0, 1e6),
    data=st.data(),
)
def test_partition_property(x0, y0, width, height, data):
    """Regions are disjoint and exhaustive over random extents and points."""
    spec = make_folds((x0, y0, x0 + width, y0 + height))
    x = data.draw(st.floats(x0, x0 + width))
    y = data.draw(st.floats(y0, y0 + height))
    hits = [r.fold for r in spec.regions if spec.contains(r, x, y)]
    assert len(hits) == 1


@pytest.fixture(scope="module")
def tiny_corpus():
    from wetlandseg.model import build_netspec, halo_of
    from wetlandseg.synthmap import SynthConfig, generate, generate_corpus

    scene = generate(SynthConfig(seed=3, rows=320, cols=320, pixel_size=5.0,
                                 wetland_fraction=0.15))
    spec = build_netspec(hidden_channels=(8, 8, 8, 8, 8, 8))
    return generate_corpus(scene, halo_of(spec)), spec


class TestCrossValidate:
    def test_empty_fold_rejected(self):
        from wetlandseg.geodata import Tile
        from wetlandseg.model import build_netspec
        from wetlandseg.folds import cross_validate
        from wetlandseg.optim import TrainConfig

        spec = build_netspec(hidden_channels=(4,), kernel_sizes=(3, 3))
        tiles = [Tile(np.zeros((3, 10, 10), np.float32), np.zeros((6, 6), np.uint8),
                      np.ones((6, 6), np.uint8), (0, 0), (0.0, 0.0), fold=0)]
        with pytest.raises(DataError, match="folds"):
            cross_validate(tiles, spec, TrainConfig(epochs=1, batch_size=2))

    def test_parallel_folds_match_serial(self, tiny_corpus):
        from wetlandseg.folds import cross_validate
        from wetlandseg.optim import TrainConfig

        corpus, spec = tiny_corpus
        config = TrainConfig(epochs=1, batch_size=8, learning_rate=1e-3, seed=21)
        serial = cross_validate(corpus.tiles, spec, config, jobs=1)
        parallel = cross_validate(corpus.tiles, spec, config, jobs=2)
        assert serial.report_dict() == parallel.report_dict()
        assert len(serial.per_fold) == 10
