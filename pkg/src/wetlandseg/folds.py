"""Spatial 10-fold partition: a 3x3 grid with the central cell split in two.

Regions are enumerated west-to-east within south-to-north rows, so fold 0
is the southwest cell; the central cell's halves are ordered (north,
south), giving ids 4 and 5.  Region edges are half-open (minimum edge
inclusive) except along the extent's maximum edges, which are closed so
the ten regions exactly cover the bounding box.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from wetlandseg.errors import DataError
from wetlandseg.metrics import Confusion, Scores, confusion as count_confusion, \
    f1_score, precision_recall_f1

SPLIT_AXES = ("horizontal", "vertical")


@dataclass(frozen=True)
class Region:
    fold: int
    x_min: float
    y_min: float
    x_max: float
    y_max: float


@dataclass(frozen=True)
class FoldSpec:
    extent: tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)
    regions: tuple[Region, ...]

    def contains(self, region: Region, x: float, y: float) -> bool:
        x_hi = x <= region.x_max if region.x_max == self.extent[2] else x < region.x_max
        y_hi = y <= region.y_max if region.y_max == self.extent[3] else y < region.y_max
        return region.x_min <= x and x_hi and region.y_min <= y and y_hi


def make_folds(extent: tuple[float, float, float, float],
               split_axis: str = "horizontal") -> FoldSpec:
    """Divide an extent into the ten cross-validation regions.

    split_axis chooses how the central cell is halved: "horizontal" cuts it
    into north/south halves (the default), "vertical" into west/east halves.
    """
    if split_axis not in SPLIT_AXES:
        raise ValueError(f"split_axis must be one of {SPLIT_AXES}, got {split_axis!r}")
    x0, y0, x1, y1 = (float(v) for v in extent)
    if x1 <= x0 or y1 <= y0:
        raise DataError(f"zero-area extent {extent}")
    xe = [x0, x0 + (x1 - x0) / 3.0, x0 + 2.0 * (x1 - x0) / 3.0, x1]
    ye = [y0, y0 + (y1 - y0) / 3.0, y0 + 2.0 * (y1 - y0) / 3.0, y1]

    regions: list[Region] = []
    fold = 0
    for r in range(3):
        for c in range(3):
            if r == 1 and c == 1:
                if split_axis == "horizontal":
                    mid = (ye[1] + ye[2]) / 2.0
                    regions.append(Region(fold, xe[1], mid, xe[2], ye[2]))      # north
                    regions.append(Region(fold + 1, xe[1], ye[1], xe[2], mid))  # south
                else:
                    mid = (xe[1] + xe[2]) / 2.0
                    regions.append(Region(fold, xe[1], ye[1], mid, ye[2]))      # west
                    regions.append(Region(fold + 1, mid, ye[1], xe[2], ye[2]))  # east
                fold += 2
            else:
                regions.append(Region(fold, xe[c], ye[r], xe[c + 1], ye[r + 1]))
                fold += 1
    return FoldSpec((x0, y0, x1, y1), tuple(regions))


def assign_fold(spec: FoldSpec, x: float, y: float) -> int:
    """Fold id of the unique region containing the point."""
    x0, y0, x1, y1 = spec.extent
    if not (x0 <= x <= x1 and y0 <= y <= y1):
        raise DataError(f"point ({x}, {y}) lies outside the fold extent {spec.extent}")
    for region in spec.regions:
        if spec.contains(region, x, y):
            return region.fold
    raise DataError(f"point ({x}, {y}) matched no region; fold spec is inconsistent")


def fold_spec_to_dict(spec: FoldSpec) -> dict:
    return {
        "extent": list(spec.extent),
        "regions": [
            {"fold": r.fold, "x_min": r.x_min, "y_min": r.y_min,
             "x_max": r.x_max, "y_max": r.y_max}
            for r in spec.regions
        ],
    }


def fold_spec_from_dict(data: dict) -> FoldSpec:
    regions = tuple(
        Region(r["fold"], r["x_min"], r["y_min"], r["x_max"], r["y_max"])
        for r in data["regions"]
    )
    return FoldSpec(tuple(data["extent"]), regions)


def save_fold_spec(path, spec: FoldSpec) -> None:
    Path(path).write_text(json.dumps(fold_spec_to_dict(spec), indent=2, sort_keys=True) + "\n")


def load_fold_spec(path) -> FoldSpec:
    return fold_spec_from_dict(json.loads(Path(path).read_text()))


def assign_tiles(spec: FoldSpec, tiles) -> None:
    """Stamp each tile's fold id from its core center point (in place)."""
    for tile in tiles:
        tile.fold = assign_fold(spec, *tile.center_xy)


# --- cross-validation ---------------------------------------------------------

N_FOLDS = 10


@dataclass
class FoldResult:
    fold: int
    confusion: Confusion
    scores: Scores
    checkpoint: object = None
    history: list = field(default_factory=list)


@dataclass
class CrossValResult:
    per_fold: list[FoldResult]
    pooled_confusion: Confusion
    pooled: Scores              # micro average: from the summed confusion
    macro: dict                 # mean of the defined per-fold scores

    def report_dict(self) -> dict:
        return {
            "pooled": {**self.pooled.as_dict(), "confusion": self.pooled_confusion.as_dict()},
            "macro": self.macro,
            "per_fold": [
                {"fold": fr.fold, **fr.scores.as_dict(), "confusion": fr.confusion.as_dict()}
                for fr in self.per_fold
            ],
        }


def _evaluate_fold(spec, weights, tiles, config, threshold_cut: float):
    from wetlandseg.model import forward
    from wetlandseg.postproc import threshold

    margin = config.overlap_margin
    total = Confusion()
    for start in range(0, len(tiles), config.batch_size):
        batch = tiles[start:start + config.batch_size]
        x = np.stack([t.window for t in batch]).astype(np.float32)
        prob = forward(spec, weights, x, mode="eval", slope=config.leaky_slope)
        if margin:
            prob = prob[:, :, margin:-margin, margin:-margin]
        for i, tile in enumerate(batch):
            pred = threshold(prob[i, 0], threshold_cut)
            total = total + count_confusion(pred, tile.label, tile.validity)
    return total


def cross_validate(tiles, spec, config, jobs: int = 1, threshold_cut: float = 0.5,
                   on_fold=None) -> CrossValResult:
    """Train 10 models, each leaving one spatial fold out, and score them.

    Every tile must carry a fold id in [0, 10).  Per-fold training seeds are
    derived from (config.seed, fold), so --jobs > 1 changes scheduling but
    not any fold's arithmetic.  Returns per-fold and pooled (micro) metrics
    plus macro means; checkpoints ride along on the per-fold results.
    """
    from wetlandseg.optim import train

    by_fold: dict[int, list] = {f: [] for f in range(N_FOLDS)}
    for tile in tiles:
        if tile.fold not in by_fold:
            raise DataError(f"tile at {tile.core_origin} has fold id {tile.fold}, "
                            f"expected 0..{N_FOLDS - 1}")
        by_fold[tile.fold].append(tile)
    empty = [f for f, members in by_fold.items() if not members]
    if empty:
        raise DataError(f"folds {empty} contain no tiles")

    def run_fold(fold: int) -> FoldResult:
        held_out = by_fold[fold]
        train_tiles = [t for t in tiles if t.fold != fold]
        fold_seed = int(np.random.SeedSequence((config.seed, fold)).generate_state(1)[0])
        result = train(train_tiles, replace(config, seed=fold_seed), spec)
        conf = _evaluate_fold(spec, result.checkpoint.weights, held_out, config,
                              threshold_cut)
        if on_fold is not None:
            on_fold(fold, held_out)
        return FoldResult(fold, conf, precision_recall_f1(conf),
                          result.checkpoint, result.history)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(run_fold, range(N_FOLDS)))
    else:
        per_fold = [run_fold(f) for f in range(N_FOLDS)]

    pooled_conf = Confusion()
    for fr in per_fold:
        pooled_conf = pooled_conf + fr.confusion
    pooled = precision_recall_f1(pooled_conf)

    defined = [fr.scores for fr in per_fold if fr.scores.f1 is not None]
    if defined:
        mp = float(np.mean([s.precision for s in defined]))
        mr = float(np.mean([s.recall for s in defined]))
        macro = {"precision": mp, "recall": mr,
                 "f1": float(np.mean([s.f1 for s in defined])),
                 "f1_of_means": f1_score(mp, mr)}
    else:
        macro = {"precision": None, "recall": None, "f1": None, "f1_of_means": None}

    return CrossValResult(per_fold, pooled_conf, pooled, macro)
