"""Georeferenced raster I/O, polygon rasterization, and tile planning.

Rasters travel as PNG images with ESRI world-file sidecars (six ASCII
lines: pixel width, two rotation terms that must be zero, negative pixel
height, then the x and y of the top-left pixel *center*).  Probability
rasters are 16-bit grayscale PNGs where value / 65535 is the probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from wetlandseg.errors import DataError, ShapeError


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel <-> CRS mapping, north-up only.

    origin_x/origin_y locate the *center* of pixel (row 0, col 0); pixel
    sizes are stored positive, with y decreasing as rows grow southward.
    """

    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    crs_label: str = "local"

    def __post_init__(self):
        if self.pixel_size_x <= 0 or self.pixel_size_y <= 0:
            raise DataError(
                f"pixel sizes must be positive, got {self.pixel_size_x}, {self.pixel_size_y}"
            )

    def pixel_center(self, row: float, col: float) -> tuple[float, float]:
        return (self.origin_x + col * self.pixel_size_x,
                self.origin_y - row * self.pixel_size_y)

    def to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Fractional (row, col) of a CRS point; exact inverse of pixel_center."""
        return ((self.origin_y - y) / self.pixel_size_y,
                (x - self.origin_x) / self.pixel_size_x)

    def shifted(self, row0: int, col0: int) -> "GeoTransform":
        """Transform for a window whose pixel (0, 0) is this raster's (row0, col0)."""
        ox, oy = self.pixel_center(row0, col0)
        return replace(self, origin_x=ox, origin_y=oy)

    @property
    def pixel_area(self) -> float:
        return self.pixel_size_x * self.pixel_size_y

    def extent(self, rows: int, cols: int) -> tuple[float, float, float, float]:
        """Outer bounding box (min_x, min_y, max_x, max_y) of a rows x cols raster."""
        x0 = self.origin_x - self.pixel_size_x / 2.0
        y1 = self.origin_y + self.pixel_size_y / 2.0
        x1 = x0 + cols * self.pixel_size_x
        y0 = y1 - rows * self.pixel_size_y
        return (x0, y0, x1, y1)


@dataclass
class GeoRaster:
    """Pixel grid with a geotransform; values are (channels, rows, cols)."""

    values: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim == 2:
            self.values = self.values[None, :, :]
        if self.values.ndim != 3:
            raise ShapeError(f"raster values must be (channels, rows, cols), got {self.values.shape}")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def rows(self) -> int:
        return self.values.shape[1]

    @property
    def cols(self) -> int:
        return self.values.shape[2]


@dataclass
class LabelRaster:
    """Binary wetland mask plus a validity mask on the same grid."""

    labels: np.ndarray
    validity: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.validity = np.asarray(self.validity, dtype=np.uint8)
        if self.labels.shape != self.validity.shape:
            raise ShapeError(
                f"label shape {self.labels.shape} != validity shape {self.validity.shape}"
            )


# --- world files and PNG I/O ----------------------------------------------

def write_world_file(path, transform: GeoTransform) -> None:
    lines = [
        repr(float(transform.pixel_size_x)),
        "0.0",
        "0.0",
        repr(-float(transform.pixel_size_y)),
        repr(float(transform.origin_x)),
        repr(float(transform.origin_y)),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_world_file(path, crs_label: str = "local") -> GeoTransform:
    text = Path(path).read_text()
    raw = [line.strip() for line in text.splitlines() if line.strip()]
    if len(raw) != 6:
        raise DataError(f"world file {path} has {len(raw)} values, expected 6")
    try:
        a, d, b, e, c, f = (float(v) for v in raw)
    except ValueError as exc:
        raise DataError(f"world file {path} has a non-numeric line: {exc}") from exc
    if d != 0.0 or b != 0.0:
        raise DataError(f"world file {path} has unsupported rotation terms ({d}, {b})")
    if a <= 0 or e >= 0:
        raise DataError(
            f"world file {path}: expected positive x pixel size and negative y term, "
            f"got {a} and {e}"
        )
    return GeoTransform(c, f, a, -e, crs_label)


def world_file_path(image_path) -> Path:
    return Path(image_path).with_suffix(".wld")


def read_raster(image_path, world_path=None, crs_label: str = "local") -> GeoRaster:
    """8-bit RGB or grayscale PNG plus world file -> GeoRaster (uint8 values)."""
    world_path = world_path or world_file_path(image_path)
    transform = read_world_file(world_path, crs_label)
    try:
        img = Image.open(image_path)
        img.load()
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {image_path}: {exc}") from exc
    if img.mode not in ("RGB", "L"):
        raise DataError(f"{image_path}: unsupported image mode {img.mode!r} (want RGB or L)")
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)
    return GeoRaster(arr, transform)


def write_raster(image_path, raster: GeoRaster, world_path=None) -> None:
    arr = raster.values
    if arr.dtype != np.uint8:
        raise DataError(f"write_raster expects uint8 values, got {arr.dtype}")
    if raster.channels == 1:
        img = Image.fromarray(arr[0], mode="L")
    elif raster.channels == 3:
        img = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    else:
        raise DataError(f"cannot write raster with {raster.channels} channels")
    img.save(image_path, format="PNG")
    write_world_file(world_path or world_file_path(image_path), raster.transform)


def write_probability_raster(image_path, raster: GeoRaster, world_path=None) -> None:
    """Probabilities in [0, 1] -> 16-bit grayscale PNG (value / 65535)."""
    if raster.channels != 1:
        raise DataError("probability raster must have exactly one channel")
    values = raster.values[0]
    if values.min() < 0 or values.max() > 1:
        raise DataError("probability values must lie in [0, 1]")
    quantized = np.round(values * 65535.0).astype(np.uint16)
    Image.fromarray(quantized).save(image_path, format="PNG")
    write_world_file(world_path or world_file_path(image_path), raster.transform)


def read_probability_raster(image_path, world_path=None, crs_label: str = "local") -> GeoRaster:
    world_path = world_path or world_file_path(image_path)
    transform = read_world_file(world_path, crs_label)
    try:
        img = Image.open(image_path)
        img.load()
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {image_path}: {exc}") from exc
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.dtype not in (np.uint16, np.int32):
        raise DataError(
            f"{image_path}: expected 16-bit grayscale, got {arr.dtype} with shape {arr.shape}"
        )
    prob = arr.astype(np.float32) / 65535.0
    return GeoRaster(prob[None, :, :], transform)


# --- polygon rasterization --------------------------------------------------

def rasterize_polygons(layer, transform: GeoTransform, dims: tuple[int, int]) -> LabelRaster:
    """Label a pixel 1 iff its center is inside the polygon set (even-odd rule).

    Holes subtract because all rings of a feature participate in the same
    parity count.  Raises on degenerate rings (< 3 distinct vertices).
    """
    rows, cols = dims
    labels = np.zeros((rows, cols), dtype=np.uint8)

    edges = []  # (y_low, y_high, x_at_y_low, dx/dy) for non-horizontal edges
    for idx, feature in enumerate(layer.features):
        for ring in [feature.exterior, *feature.holes]:
            pts = [(float(x), float(y)) for x, y in ring]
            if len(pts) > 1 and pts[0] == pts[-1]:
                pts = pts[:-1]
            if len(set(pts)) < 3:
                raise DataError(f"feature {idx}: degenerate ring with < 3 distinct vertices")
            for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
                if y1 == y2:
                    continue  # horizontal edges never cross a scanline strictly
                if y1 > y2:
                    x1, y1, x2, y2 = x2, y2, x1, y1
                edges.append((y1, y2, x1, (x2 - x1) / (y2 - y1)))

    if edges:
        ey1 = np.array([e[0] for e in edges])
        ey2 = np.array([e[1] for e in edges])
        ex1 = np.array([e[2] for e in edges])
        slope = np.array([e[3] for e in edges])
        centers_x = transform.origin_x + np.arange(cols) * transform.pixel_size_x
        for row in range(rows):
            y = transform.origin_y - row * transform.pixel_size_y
            # half-open in y: low end inclusive, high end exclusive
            hit = (ey1 <= y) & (y < ey2)
            if not hit.any():
                continue
            xs = np.sort(ex1[hit] + (y - ey1[hit]) * slope[hit])
            parity = np.searchsorted(xs, centers_x, side="left") % 2
            labels[row] = parity

    return LabelRaster(labels, np.ones((rows, cols), dtype=np.uint8), transform)


# --- tiling ------------------------------------------------------------------

@dataclass(frozen=True)
class TilePlan:
    """Core origins covering a raster on a stride-`core` grid.

    Edge cores are shifted inward so they end at the raster boundary; where
    that makes cores overlap, the first-planned core owns the shared pixels.
    Each input window is the core expanded by halo + overlap_margin per side.
    """

    raster_dims: tuple[int, int]
    core: int
    halo: int
    overlap_margin: int
    origins: tuple[tuple[int, int], ...] = field(default=())

    @property
    def pad(self) -> int:
        return self.halo + self.overlap_margin

    def core_dims(self) -> tuple[int, int]:
        rows, cols = self.raster_dims
        return (min(self.core, rows), min(self.core, cols))


def _axis_origins(length: int, core: int) -> list[int]:
    if length <= core:
        return [0]
    origins = list(range(0, length - core + 1, core))
    if origins[-1] + core < length:
        origins.append(length - core)
    return origins


def plan_tiles(raster_dims: tuple[int, int], core: int = 80, halo: int = 21,
               overlap_margin: int = 0) -> TilePlan:
    rows, cols = raster_dims
    if rows < 1 or cols < 1:
        raise ShapeError(f"raster dims must be >= 1x1, got {raster_dims}")
    if overlap_margin < 0:
        raise ValueError(f"overlap margin must be >= 0, got {overlap_margin}")
    core_r = min(core, rows)
    core_c = min(core, cols)
    origins = tuple(
        (r, c) for r in _axis_origins(rows, core_r) for c in _axis_origins(cols, core_c)
    )
    return TilePlan((rows, cols), core, halo, overlap_margin, origins)


def extract_window(values: np.ndarray, core_origin: tuple[int, int],
                   core_dims: tuple[int, int], pad: int) -> np.ndarray:
    """Core region expanded by `pad` per side, float32 scaled to [0, 1].

    Pixels outside the raster are filled by mirroring at the boundary (edge
    rows/cols included in the reflection).  uint8 inputs are divided by 255;
    float inputs are assumed to already be in [0, 1].
    """
    if values.ndim == 2:
        values = values[None, :, :]
    _, rows, cols = values.shape
    r0, c0 = core_origin
    core_r, core_c = core_dims
    if r0 < 0 or c0 < 0 or r0 + core_r > rows or c0 + core_c > cols:
        raise ShapeError(f"core at {core_origin} size {core_dims} exceeds raster {rows}x{cols}")

    lo_r, hi_r = r0 - pad, r0 + core_r + pad
    lo_c, hi_c = c0 - pad, c0 + core_c + pad
    crop = values[:, max(lo_r, 0):min(hi_r, rows), max(lo_c, 0):min(hi_c, cols)]
    pad_spec = (
        (0, 0),
        (max(-lo_r, 0), max(hi_r - rows, 0)),
        (max(-lo_c, 0), max(hi_c - cols, 0)),
    )
    if any(p for pair in pad_spec for p in pair):
        crop = np.pad(crop, pad_spec, mode="symmetric")
    window = crop.astype(np.float32)
    if values.dtype == np.uint8:
        window /= 255.0
    return window


def stitch(predictions, plan: TilePlan, transform: GeoTransform) -> GeoRaster:
    """Assemble per-core predictions into one raster; first-planned core owns overlaps.

    `predictions` maps core origin (row, col) -> 2D array of core_dims shape.
    Values are copied bit-exactly.
    """
    rows, cols = plan.raster_dims
    core_r, core_c = plan.core_dims()
    first = next(iter(predictions.values()), None)
    dtype = first.dtype if first is not None else np.float32
    out = np.zeros((rows, cols), dtype=dtype)
    claimed = np.zeros((rows, cols), dtype=bool)
    for origin in plan.origins:
        if origin not in predictions:
            raise DataError(f"missing prediction for core at origin {origin}")
        tile = np.asarray(predictions[origin])
        if tile.shape != (core_r, core_c):
            raise ShapeError(
                f"prediction at {origin} has shape {tile.shape}, expected {(core_r, core_c)}"
            )
        r0, c0 = origin
        region = np.s_[r0:r0 + core_r, c0:c0 + core_c]
        unclaimed = ~claimed[region]
        out[region][unclaimed] = tile[unclaimed]
        claimed[region] = True
    return GeoRaster(out[None, :, :], transform)


# --- training tiles -----------------------------------------------------------

@dataclass
class Tile:
    """One training/inference unit: an input window plus its core's labels."""

    window: np.ndarray        # (channels, core + 2*pad, core + 2*pad) float32
    label: np.ndarray         # (core_r, core_c) uint8
    validity: np.ndarray      # (core_r, core_c) uint8
    core_origin: tuple[int, int]
    center_xy: tuple[float, float]
    fold: int = -1


def build_tiles(raster: GeoRaster, labels: LabelRaster, plan: TilePlan) -> list[Tile]:
    if (labels.labels.shape != (raster.rows, raster.cols)):
        raise ShapeError(
            f"label grid {labels.labels.shape} does not match raster "
            f"{(raster.rows, raster.cols)}"
        )
    core_r, core_c = plan.core_dims()
    tiles = []
    for r0, c0 in plan.origins:
        window = extract_window(raster.values, (r0, c0), (core_r, core_c), plan.pad)
        label = labels.labels[r0:r0 + core_r, c0:c0 + core_c].copy()
        validity = labels.validity[r0:r0 + core_r, c0:c0 + core_c].copy()
        center = raster.transform.pixel_center(
            r0 + (core_r - 1) / 2.0, c0 + (core_c - 1) / 2.0
        )
        tiles.append(Tile(window, label, validity, (r0, c0), center))
    return tiles
