"""Elementwise layers and the masked cross-entropy loss, with hand-written backwards."""

from __future__ import annotations

import numpy as np

from wetlandseg.errors import EmptySupportError, ShapeError

BCE_EPS = 1e-7  # clamp for the logs so saturated probabilities stay finite


def leaky_relu(x: np.ndarray, slope: float = 0.01) -> np.ndarray:
    """x where x >= 0, slope * x elsewhere."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky ReLU slope must be in (0, 1), got {slope}")
    return np.where(x >= 0, x, x * np.asarray(slope, dtype=x.dtype))


def leaky_relu_backward(x: np.ndarray, grad_out: np.ndarray, slope: float = 0.01) -> np.ndarray:
    """Multiplies grad_out by 1 on the non-negative branch and by slope elsewhere."""
    factor = np.where(x >= 0, np.asarray(1.0, x.dtype), np.asarray(slope, x.dtype))
    return grad_out * factor


def dropout(
    x: np.ndarray, rate: float, mode: str = "train", rng_seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout.

    Train mode zeroes each element independently with probability `rate` and
    scales survivors by 1/(1-rate), so the expectation matches eval mode.
    Returns (output, mask); the mask already contains the survivor scaling and
    is what the backward pass multiplies by.  Eval mode is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x, np.ones_like(x)
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / np.asarray(1.0 - rate, dtype=x.dtype)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return grad_out * mask


def sigmoid(x: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(-x)), branched on sign so large |x| never overflows."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Backward in terms of the forward output: d sigmoid = out * (1 - out)."""
    return grad_out * out * (1.0 - out)


def bce_loss(
    prob: np.ndarray, label: np.ndarray, validity: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over valid pixels, plus its gradient w.r.t. prob.

    Pixels with validity 0 contribute nothing to loss or gradient.  The logs
    are guarded by clamping prob into [BCE_EPS, 1 - BCE_EPS].
    """
    prob = np.asarray(prob)
    label = np.asarray(label, dtype=prob.dtype)
    if label.shape != prob.shape:
        raise ShapeError(f"label shape {label.shape} does not match prob {prob.shape}")
    if validity is None:
        valid = np.ones(prob.shape, dtype=bool)
    else:
        validity = np.asarray(validity)
        if validity.shape != prob.shape:
            raise ShapeError(
                f"validity shape {validity.shape} does not match prob {prob.shape}"
            )
        valid = validity != 0
    n_valid = int(np.count_nonzero(valid))
    if n_valid == 0:
        raise EmptySupportError("empty loss support: no valid pixels")

    eps = np.asarray(BCE_EPS, dtype=prob.dtype)
    p = np.clip(prob, eps, 1.0 - eps)
    terms = -(label * np.log(p) + (1.0 - label) * np.log1p(-p))
    loss = float(terms[valid].mean())

    grad = (-label / p + (1.0 - label) / (1.0 - p)) / n_valid
    grad[~valid] = 0
    return loss, grad
