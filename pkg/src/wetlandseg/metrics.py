"""Pixelwise confusion counts, precision/recall/F1, and the agreement map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from wetlandseg.errors import EmptySupportError, ShapeError


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp,
                         self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class Scores:
    """Precision/recall/F1; a field is None when its denominator is zero."""

    precision: float | None
    recall: float | None
    f1: float | None

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _check_aligned(pred, label, validity):
    if pred.shape != label.shape:
        raise ShapeError(f"prediction shape {pred.shape} != label shape {label.shape}")
    if validity is not None and np.asarray(validity).shape != pred.shape:
        raise ShapeError(
            f"validity shape {np.asarray(validity).shape} != prediction shape {pred.shape}"
        )


def confusion(pred: np.ndarray, label: np.ndarray,
              validity: np.ndarray | None = None) -> Confusion:
    """Counts over valid pixels; positive class = wetland (nonzero)."""
    pred = np.asarray(pred)
    label = np.asarray(label)
    _check_aligned(pred, label, validity)
    valid = np.ones(pred.shape, dtype=bool) if validity is None else np.asarray(validity) != 0
    if not valid.any():
        raise EmptySupportError("empty evaluation support: no valid pixels")
    p = (pred != 0) & valid
    t = (label != 0) & valid
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(np.count_nonzero(valid)) - tp - fp - fn
    return Confusion(tp, fp, fn, tn)


def f1_score(precision: float, recall: float) -> float | None:
    """Harmonic mean of precision and recall; None when both are zero."""
    if precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(c: Confusion) -> Scores:
    """Never silently zero: undefined ratios come back as None."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    else:
        f1 = f1_score(precision, recall)
    return Scores(precision, recall, f1)


# agreement-map category codes and export colors
BACKGROUND = 0      # valid true negatives, plus invalid pixels
AGREE = 1           # true positives
FALSE_POSITIVE = 2
FALSE_NEGATIVE = 3

AGREEMENT_COLORS = {
    BACKGROUND: (255, 255, 255),      # white
    AGREE: (64, 160, 72),             # green
    FALSE_POSITIVE: (240, 112, 190),  # pink
    FALSE_NEGATIVE: (245, 150, 50),   # orange
}


def agreement_map(pred: np.ndarray, label: np.ndarray,
                  validity: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel categories: agree (tp), false positive, false negative, background.

    Category counts for AGREE/FALSE_POSITIVE/FALSE_NEGATIVE equal the tp/fp/fn
    confusion counts; BACKGROUND collects valid true negatives and any invalid
    pixels.
    """
    pred = np.asarray(pred)
    label = np.asarray(label)
    _check_aligned(pred, label, validity)
    valid = np.ones(pred.shape, dtype=bool) if validity is None else np.asarray(validity) != 0
    p = (pred != 0) & valid
    t = (label != 0) & valid
    out = np.full(pred.shape, BACKGROUND, dtype=np.uint8)
    out[p & t] = AGREE
    out[p & ~t] = FALSE_POSITIVE
    out[~p & t] = FALSE_NEGATIVE
    return out


def write_agreement_png(path, categories: np.ndarray) -> None:
    """Indexed-color PNG of an agreement map."""
    img = Image.fromarray(categories.astype(np.uint8), mode="P")
    palette = [0] * 768
    for code, (r, g, b) in AGREEMENT_COLORS.items():
        palette[3 * code:3 * code + 3] = [r, g, b]
    img.putpalette(palette)
    img.save(path, format="PNG")
