"""4-axis grid conventions used by every network operation.

A "grid" is a plain C-contiguous numpy array of shape
(batch, channels, rows, cols), float32 for training and float64 for
gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wetlandseg.errors import ShapeError

FLOAT_DTYPES = (np.float32, np.float64)


def as_grid4(a: np.ndarray, name: str = "input") -> np.ndarray:
    """Validate and return `a` as a C-contiguous 4-axis float grid."""
    a = np.asarray(a)
    if a.ndim != 4:
        raise ShapeError(f"{name} must have 4 axes (batch, channels, rows, cols), got {a.ndim}")
    if any(d < 1 for d in a.shape):
        raise ShapeError(f"{name} has an empty axis: shape {a.shape}")
    if a.dtype not in FLOAT_DTYPES:
        a = a.astype(np.float32)
    return np.ascontiguousarray(a)


@dataclass
class ConvKernel:
    """Weights of one convolutional layer.

    weights: (out_channels, in_channels, k, k); bias: (out_channels,).
    Any k >= 1 is accepted here; network architecture code additionally
    requires odd k so the per-side halo (k - 1) / 2 is integral.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = as_grid4(self.weights, "kernel weights")
        self.bias = np.ascontiguousarray(np.asarray(self.bias))
        out_c, _, kh, kw = self.weights.shape
        if kh != kw:
            raise ShapeError(f"kernel must be square, got {kh}x{kw}")
        if self.bias.shape != (out_c,):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match {out_c} output channels"
            )
        if self.bias.dtype != self.weights.dtype:
            self.bias = self.bias.astype(self.weights.dtype)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[2]

    def copy(self) -> "ConvKernel":
        return ConvKernel(self.weights.copy(), self.bias.copy())
