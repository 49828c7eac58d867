"""Synthetic hand-drawn-style map scenes with exact ground-truth polygons.

Wetlands are smooth random blobs rendered as short horizontal dash
hatching clipped to the blob interiors, on a parchment background littered
with contour- and road-like line clutter.  The class is encoded by
texture, with only a mild tone difference between hatch ink and clutter
ink, so a model has to read local patterns rather than a single color.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wetlandseg.errors import DataError
from wetlandseg.folds import FoldSpec, assign_tiles, make_folds
from wetlandseg.geodata import (
    GeoRaster,
    GeoTransform,
    LabelRaster,
    Tile,
    TilePlan,
    build_tiles,
    plan_tiles,
    rasterize_polygons,
)
from wetlandseg.postproc import Feature, VectorLayer, shoelace_area

DEFAULT_PALETTE = {
    "background": (233, 221, 199),
    "terrain_line": (110, 98, 82),
    "wetland_hatch": (24, 32, 52),
}


@dataclass
class SynthConfig:
    seed: int = 0
    rows: int = 1024
    cols: int = 1024
    pixel_size: float = 5.0
    wetland_fraction: float = 0.2
    clutter_density: float = 1.0
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    crs_label: str = "local"

    def __post_init__(self):
        if not 0.0 <= self.wetland_fraction <= 0.6:
            raise DataError(
                f"wetland fraction must be in [0, 0.6], got {self.wetland_fraction}"
            )
        if self.rows < 160 or self.cols < 160:
            raise DataError(f"scene must be at least 160x160 px, got {self.rows}x{self.cols}")
        missing = set(DEFAULT_PALETTE) - set(self.palette)
        if missing:
            raise DataError(f"palette missing entries: {sorted(missing)}")


@dataclass
class SynthScene:
    raster: GeoRaster
    truth: VectorLayer
    labels: LabelRaster


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, *tags)))


def _blob_ring(rng, center_xy, radius, n_vertices=48):
    """Simple closed curve from a smoothed radial profile; star-shaped, so valid."""
    cx, cy = center_xy
    harmonics = range(2, 6)
    amps = [rng.uniform(0.0, 0.35 / k) for k in harmonics]
    phases = [rng.uniform(0.0, 2.0 * np.pi) for _ in harmonics]
    theta = np.linspace(0.0, 2.0 * np.pi, n_vertices, endpoint=False)
    profile = np.ones_like(theta)
    for k, amp, phase in zip(harmonics, amps, phases):
        profile += amp * np.cos(k * theta + phase)
    r = radius * np.clip(profile, 0.25, None)
    xs = cx + r * np.cos(theta)
    ys = cy + r * np.sin(theta)
    ring = [(float(x), float(y)) for x, y in zip(xs, ys)]
    ring.append(ring[0])
    return ring


def _place_wetlands(config: SynthConfig, transform: GeoTransform) -> VectorLayer:
    """Blob polygons with disjoint bounding boxes until the target area is met."""
    rng = _rng(config.seed, 1)
    px = config.pixel_size
    width = config.cols * px
    height = config.rows * px
    x0, y0, x1, y1 = transform.extent(config.rows, config.cols)
    target = config.wetland_fraction * width * height

    features: list[Feature] = []
    boxes: list[tuple[float, float, float, float]] = []
    placed_area = 0.0
    attempts = 0
    max_attempts = 4000
    while placed_area < target and attempts < max_attempts:
        attempts += 1
        radius = rng.uniform(20.0, 75.0) * px
        reach = 1.5 * radius + 2 * px  # radial profile never exceeds 1.45 * radius
        if x1 - x0 <= 2 * reach or y1 - y0 <= 2 * reach:
            break
        cx = rng.uniform(x0 + reach, x1 - reach)
        cy = rng.uniform(y0 + reach, y1 - reach)
        ring = _blob_ring(rng, (cx, cy), radius)
        xs = [p[0] for p in ring]
        ys = [p[1] for p in ring]
        # disjoint bounding boxes keep the polygon set overlap-free, so the
        # even-odd rasterization is a plain union
        box = (min(xs) - px, min(ys) - px, max(xs) + px, max(ys) + px)
        if any(not (box[2] < b[0] or b[2] < box[0] or box[3] < b[1] or b[3] < box[1])
               for b in boxes):
            continue
        area = shoelace_area(ring)
        if area <= 0:
            continue
        boxes.append(box)
        features.append(Feature(ring, [], float(area), None, len(features) + 1))
        placed_area += area
    return VectorLayer(features, config.crs_label)


def _draw_paths(canvas, rows, cols, rng, n_paths, steps, tone, tone_jitter, thick=1):
    """Wandering polyline clutter, drawn everywhere it passes."""
    for _ in range(n_paths):
        r = rng.uniform(0, rows)
        c = rng.uniform(0, cols)
        heading = rng.uniform(0, 2 * np.pi)
        n = int(rng.uniform(0.5, 1.0) * steps)
        turns = rng.normal(0.0, 0.22, size=n)
        for t in range(n):
            heading += turns[t]
            r += np.sin(heading)
            c += np.cos(heading)
            ri, ci = int(r), int(c)
            if not (0 <= ri < rows and 0 <= ci < cols):
                break
            jitter = rng.integers(-tone_jitter, tone_jitter + 1)
            value = np.clip(np.asarray(tone) + jitter, 0, 255).astype(np.uint8)
            canvas[:, ri:ri + thick, ci:ci + thick] = value[:, None, None]


def _draw_hatching(canvas, labels, rng, tone, tone_jitter):
    """Short horizontal dashes on every few rows, clipped to the label mask."""
    rows, cols = labels.shape
    spacing = 2
    dash_on, dash_off = 9, 2
    period = dash_on + dash_off
    phase_row = rng.integers(0, spacing)
    col_idx = np.arange(cols)
    for r in range(rows):
        if (r + phase_row) % spacing != 0:
            continue
        row_mask = labels[r] != 0
        if not row_mask.any():
            continue
        phase_col = int(rng.integers(0, period))
        dash = ((col_idx + phase_col) % period) < dash_on
        ink = row_mask & dash
        if not ink.any():
            continue
        jitter = rng.integers(-tone_jitter, tone_jitter + 1, size=int(ink.sum()))
        for ch in range(3):
            canvas[ch, r, ink] = np.clip(tone[ch] + jitter, 0, 255).astype(np.uint8)


def generate(config: SynthConfig) -> SynthScene:
    """Deterministic scene: RGB raster, ground-truth polygons, exact label mask."""
    transform = GeoTransform(
        origin_x=0.0,
        origin_y=(config.rows - 1) * config.pixel_size,
        pixel_size_x=config.pixel_size,
        pixel_size_y=config.pixel_size,
        crs_label=config.crs_label,
    )
    truth = _place_wetlands(config, transform)
    label_raster = rasterize_polygons(truth, transform, (config.rows, config.cols))

    bg_rng = _rng(config.seed, 2)
    background = np.asarray(config.palette["background"], dtype=np.float64)
    canvas = background[:, None, None] + bg_rng.normal(
        0.0, 4.0, size=(3, config.rows, config.cols)
    )
    canvas = np.clip(canvas, 0, 255).astype(np.uint8)

    clutter_rng = _rng(config.seed, 3)
    n_contours = int(config.clutter_density * config.rows * config.cols / 26000)
    _draw_paths(canvas, config.rows, config.cols, clutter_rng, n_contours,
                steps=420, tone=config.palette["terrain_line"], tone_jitter=12)
    n_roads = max(int(config.clutter_density * 3), 0)
    _draw_paths(canvas, config.rows, config.cols, clutter_rng, n_roads,
                steps=1200, tone=config.palette["terrain_line"], tone_jitter=8, thick=2)

    hatch_rng = _rng(config.seed, 4)
    _draw_hatching(canvas, label_raster.labels, hatch_rng,
                   config.palette["wetland_hatch"], tone_jitter=10)

    raster = GeoRaster(canvas, transform)
    return SynthScene(raster, truth, label_raster)


@dataclass
class Corpus:
    tiles: list[Tile]
    fold_spec: FoldSpec
    plan: TilePlan
    transform: GeoTransform


def generate_corpus(scene: SynthScene, halo: int, core: int = 80,
                    overlap_margin: int = 0, split_axis: str = "horizontal") -> Corpus:
    """Tile a scene and stamp spatial fold ids; every fold must be populated."""
    raster = scene.raster
    plan = plan_tiles((raster.rows, raster.cols), core, halo, overlap_margin)
    tiles = build_tiles(raster, scene.labels, plan)
    fold_spec = make_folds(raster.transform.extent(raster.rows, raster.cols), split_axis)
    assign_tiles(fold_spec, tiles)
    populated = {t.fold for t in tiles}
    missing = sorted(set(range(10)) - populated)
    if missing:
        raise DataError(f"folds {missing} received no tiles; use a larger scene")
    return Corpus(tiles, fold_spec, plan, raster.transform)
