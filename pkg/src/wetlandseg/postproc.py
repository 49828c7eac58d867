"""Threshold, connected components, vectorization, area filtering, GeoJSON.

Vectorization traces component boundaries along pixel edges on the integer
corner lattice, so every polygon is a staircase whose even-odd
rasterization reproduces the input mask exactly.  No smoothing is applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from wetlandseg.errors import DataError
from wetlandseg.geodata import GeoTransform

GENERATOR_TAG = "wetlandseg 0.1.0"


@dataclass
class Feature:
    """One polygon: closed exterior ring (CCW), hole rings (CW), area in m2."""

    exterior: list[tuple[float, float]]
    holes: list[list[tuple[float, float]]] = field(default_factory=list)
    area_m2: float = 0.0
    pixel_count: int | None = None
    feature_id: int = 0


@dataclass
class VectorLayer:
    features: list[Feature] = field(default_factory=list)
    crs_label: str = "local"

    def total_area(self) -> float:
        return float(sum(f.area_m2 for f in self.features))


def shoelace_area(ring) -> float:
    """Signed area of a closed ring; positive for counterclockwise (y up)."""
    pts = list(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    area = 0.0
    for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
        area += x1 * y2 - x2 * y1
    return area / 2.0


def threshold(values: np.ndarray, cut: float = 0.5) -> np.ndarray:
    """Binary mask: 1 where value is strictly greater than the cut."""
    return (np.asarray(values) > cut).astype(np.uint8)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """8-connected labeling; returns (labels 1..K with 0 background, sizes[K])."""
    mask = np.asarray(mask) != 0
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    return labels.astype(np.int32), sizes


# boundary tracing on the corner lattice ------------------------------------
#
# Corner (i, j) is the top-left corner of pixel (i, j).  Directed edges keep
# the component interior on the left; at a corner where two pixels of the
# same component touch diagonally the walker takes the rightmost available
# turn, which keeps the outer boundary a single (self-touching) ring.

_E, _N, _W, _S = 0, 1, 2, 3
_DELTA = {_E: (0, 1), _N: (-1, 0), _W: (0, -1), _S: (1, 0)}
# preference per incoming direction: right turn, straight, left turn, reverse
_TURN_ORDER = {
    _E: (_S, _E, _N, _W),
    _N: (_E, _N, _W, _S),
    _W: (_N, _W, _S, _E),
    _S: (_W, _S, _E, _N),
}


def _boundary_edges(mask: np.ndarray) -> dict:
    """Map start corner -> {direction: used_flag} for all boundary edges."""
    padded = np.pad(mask, 1, mode="constant")
    inside = padded[1:-1, 1:-1]
    out: dict[tuple[int, int], dict[int, bool]] = {}

    def add(rows, cols, start_offset, direction):
        dr, dc = start_offset
        for r, c in zip(rows.tolist(), cols.tolist()):
            out.setdefault((r + dr, c + dc), {})[direction] = False

    r, c = np.nonzero(inside & ~padded[2:, 1:-1])    # south neighbor missing
    add(r, c, (1, 0), _E)                            # bottom edge, eastward
    r, c = np.nonzero(inside & ~padded[1:-1, 2:])    # east neighbor missing
    add(r, c, (1, 1), _N)                            # right edge, northward
    r, c = np.nonzero(inside & ~padded[:-2, 1:-1])   # north neighbor missing
    add(r, c, (0, 1), _W)                            # top edge, westward
    r, c = np.nonzero(inside & ~padded[1:-1, :-2])   # west neighbor missing
    add(r, c, (0, 0), _S)                            # left edge, southward
    return out


def _trace_rings(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """All boundary rings of a binary mask, as closed corner-lattice loops."""
    edges = _boundary_edges(mask)
    rings = []
    for start_vertex in sorted(edges):
        for start_dir in sorted(edges[start_vertex]):
            if edges[start_vertex][start_dir]:
                continue
            ring = [start_vertex]
            vertex, direction = start_vertex, start_dir
            edges[vertex][direction] = True
            while True:
                dr, dc = _DELTA[direction]
                vertex = (vertex[0] + dr, vertex[1] + dc)
                ring.append(vertex)
                candidates = edges.get(vertex)
                if candidates is None:
                    raise AssertionError(f"boundary walk fell off the edge set at {vertex}")
                for turn in _TURN_ORDER[direction]:
                    if turn in candidates:
                        direction = turn
                        break
                else:
                    raise AssertionError(f"no outgoing boundary edge at {vertex}")
                if vertex == start_vertex and direction == start_dir:
                    break  # ring closed
                if candidates[direction]:
                    raise AssertionError(f"boundary walk re-used an edge at {vertex}")
                candidates[direction] = True
            rings.append(_merge_collinear(ring))
    return rings


def _merge_collinear(ring: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop interior vertices of straight runs; keeps first == last closure."""
    pts = ring[:-1]
    kept = []
    n = len(pts)
    for k in range(n):
        prev, cur, nxt = pts[k - 1], pts[k], pts[(k + 1) % n]
        same_row = prev[0] == cur[0] == nxt[0]
        same_col = prev[1] == cur[1] == nxt[1]
        if not (same_row or same_col):
            kept.append(cur)
    kept.append(kept[0])
    return kept


def _lattice_area(ring: list[tuple[int, int]]) -> int:
    """Twice the signed area in pixel units, CCW-positive in map orientation."""
    pts = ring[:-1]
    acc = 0
    for (i1, j1), (i2, j2) in zip(pts, pts[1:] + pts[:1]):
        # lattice row i grows southward, so map y is -i
        acc += j1 * (-i2) - j2 * (-i1)
    return acc


def vectorize(labels: np.ndarray, transform: GeoTransform,
              crs_label: str | None = None) -> VectorLayer:
    """One feature per labeled component; exterior plus hole rings.

    Feature area is pixel_count * pixel_area (identical to the shoelace area
    of the staircase rings, which is asserted).
    """
    labels = np.asarray(labels)
    count = int(labels.max(initial=0))
    layer = VectorLayer(crs_label=crs_label or transform.crs_label)
    if count == 0:
        return layer
    slices = ndimage.find_objects(labels)
    half_x = transform.pixel_size_x / 2.0
    half_y = transform.pixel_size_y / 2.0

    for comp in range(1, count + 1):
        window = slices[comp - 1]
        if window is None:
            continue
        r0, c0 = window[0].start, window[1].start
        mask = labels[window] == comp
        pixel_count = int(np.count_nonzero(mask))
        exterior = None
        holes = []
        lattice_total = 0
        for ring in _trace_rings(mask):
            ring_area = _lattice_area(ring)
            lattice_total += ring_area
            coords = [
                (transform.origin_x + (c0 + j) * transform.pixel_size_x - half_x,
                 transform.origin_y - (r0 + i) * transform.pixel_size_y + half_y)
                for i, j in ring
            ]
            if ring_area > 0:
                if exterior is not None:
                    raise AssertionError(
                        f"component {comp} traced more than one exterior ring"
                    )
                exterior = coords
            else:
                holes.append(coords)
        if exterior is None:
            raise AssertionError(f"component {comp} traced no exterior ring")
        if lattice_total != 2 * pixel_count:
            raise AssertionError(
                f"component {comp}: ring area {lattice_total / 2} != {pixel_count} pixels"
            )
        layer.features.append(Feature(
            exterior=exterior,
            holes=holes,
            area_m2=pixel_count * transform.pixel_area,
            pixel_count=pixel_count,
            feature_id=comp,
        ))
    return layer


def filter_min_area(layer: VectorLayer, min_area: float = 1000.0) -> VectorLayer:
    """Drop features whose area is strictly less than min_area (m2)."""
    kept = [f for f in layer.features if f.area_m2 >= min_area]
    return VectorLayer(kept, layer.crs_label)


@dataclass
class AreaReport:
    total_area_m2: float
    feature_count: int
    smallest_m2: float | None
    largest_m2: float | None
    reference_m2: float
    relative_difference: float  # (total - reference) / reference

    @property
    def percent_difference(self) -> float:
        return 100.0 * self.relative_difference

    def as_dict(self) -> dict:
        return {
            "total_area_m2": self.total_area_m2,
            "feature_count": self.feature_count,
            "smallest_m2": self.smallest_m2,
            "largest_m2": self.largest_m2,
            "reference_m2": self.reference_m2,
            "relative_difference": self.relative_difference,
            "percent_difference_1dp": round(self.percent_difference, 1),
        }


def relative_area_difference(total: float, reference: float) -> float:
    if reference <= 0:
        raise ValueError(f"reference area must be positive, got {reference}")
    return (total - reference) / reference


def area_report(layer: VectorLayer, reference_total: float) -> AreaReport:
    areas = [f.area_m2 for f in layer.features]
    total = float(sum(areas))
    return AreaReport(
        total_area_m2=total,
        feature_count=len(areas),
        smallest_m2=min(areas) if areas else None,
        largest_m2=max(areas) if areas else None,
        reference_m2=reference_total,
        relative_difference=relative_area_difference(total, reference_total),
    )


# GeoJSON ---------------------------------------------------------------------

def _ring_coords(ring) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in ring]


def write_geojson(path, layer: VectorLayer) -> None:
    features = []
    for f in layer.features:
        properties = {"id": f.feature_id, "area_m2": f.area_m2}
        if f.pixel_count is not None:
            properties["pixel_count"] = f.pixel_count
        features.append({
            "type": "Feature",
            "properties": properties,
            "geometry": {
                "type": "Polygon",
                "coordinates": [_ring_coords(f.exterior)] + [_ring_coords(h) for h in f.holes],
            },
        })
    doc = {
        "type": "FeatureCollection",
        "crs_label": layer.crs_label,
        "generator": GENERATOR_TAG,
        "features": features,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def _parse_rings(coords, where: str) -> tuple[list, list]:
    if not coords:
        raise DataError(f"{where}: polygon has no rings")
    rings = []
    for ring in coords:
        if len(ring) < 4:
            raise DataError(f"{where}: ring with fewer than 4 coordinates")
        rings.append([(float(x), float(y)) for x, y in ring])
    return rings[0], rings[1:]


def read_geojson(path) -> VectorLayer:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON (line {exc.lineno}: {exc.msg})") from exc
    if doc.get("type") != "FeatureCollection":
        raise DataError(f"{path}: expected a FeatureCollection, got {doc.get('type')!r}")
    layer = VectorLayer(crs_label=doc.get("crs_label", "local"))
    for idx, feat in enumerate(doc.get("features", [])):
        where = f"{path}: feature {idx}"
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        props = feat.get("properties") or {}
        fid = props.get("id", idx)
        if gtype == "Polygon":
            exterior, holes = _parse_rings(geom.get("coordinates"), where)
            area = props.get("area_m2")
            if area is None:
                area = abs(shoelace_area(exterior)) - sum(
                    abs(shoelace_area(h)) for h in holes
                )
            layer.features.append(Feature(exterior, holes, float(area),
                                          props.get("pixel_count"), fid))
        elif gtype == "MultiPolygon":
            for part in geom.get("coordinates") or []:
                exterior, holes = _parse_rings(part, where)
                area = abs(shoelace_area(exterior)) - sum(
                    abs(shoelace_area(h)) for h in holes
                )
                layer.features.append(Feature(exterior, holes, float(area), None, fid))
        else:
            raise DataError(f"{where}: unsupported geometry type {gtype!r}")
    return layer
