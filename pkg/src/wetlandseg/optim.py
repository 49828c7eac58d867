"""Adam optimizer and the tile-based training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from wetlandseg.errors import DivergenceError, ShapeError
from wetlandseg.geodata import Tile
from wetlandseg.model import (
    Checkpoint,
    NetSpec,
    Weights,
    backward,
    forward,
    forward_training,
    halo_of,
    init_weights,
)
from wetlandseg.nn import bce_loss


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    learning_rate: float = 1e-4
    dropout_rate: float = 0.3
    validation_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    channel_scale: int = 1
    leaky_slope: float = 0.01
    overlap_margin: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("dropout_rate",):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        for name in ("beta1", "beta2", "epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class AdamState:
    """First and second moment estimates, mirroring the weight shapes."""

    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0


def init_adam_state(weights: Weights) -> AdamState:
    m = [(np.zeros_like(k.weights), np.zeros_like(k.bias)) for k in weights.kernels]
    v = [(np.zeros_like(k.weights), np.zeros_like(k.bias)) for k in weights.kernels]
    return AdamState(m, v, 0)


def adam_step(weights: Weights, grads: Sequence[tuple[np.ndarray, np.ndarray]],
              state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[Weights, AdamState]:
    """One bias-corrected Adam update, applied in place; returns (weights, state)."""
    if len(grads) != len(weights.kernels):
        raise ShapeError(f"{len(grads)} gradients for {len(weights.kernels)} layers")
    state.t += 1
    t = state.t
    correct1 = 1.0 - beta1 ** t
    correct2 = 1.0 - beta2 ** t
    for i, (kernel, (gw, gb)) in enumerate(zip(weights.kernels, grads)):
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise DivergenceError(f"non-finite gradient in layer {i}")
        for param, grad, m, v in (
            (kernel.weights, gw, state.m[i][0], state.v[i][0]),
            (kernel.bias, gb, state.m[i][1], state.v[i][1]),
        ):
            if grad.shape != param.shape:
                raise ShapeError(
                    f"layer {i}: gradient shape {grad.shape} != param shape {param.shape}"
                )
            grad = grad.astype(param.dtype, copy=False)
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * np.square(grad)
            m_hat = m / correct1
            v_hat = v / correct2
            param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return weights, state


def split_validation(items: Sequence, fraction: float, seed: int) -> tuple[list, list]:
    """Disjoint, exhaustive (train, validation) split; |val| = round(fraction * N).

    The validation size is clamped to [1, N - 1] so neither side is empty.
    Deterministic for a given seed.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(items)
    if n < 2:
        raise ValueError(f"need at least 2 items to split, got {n}")
    n_val = min(max(round(fraction * n), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    val_idx = set(order[:n_val].tolist())
    train = [items[i] for i in range(n) if i not in val_idx]
    val = [items[i] for i in range(n) if i in val_idx]
    return train, val


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict] = field(default_factory=list)


def _stack_batch(tiles: Sequence[Tile]):
    x = np.stack([t.window for t in tiles]).astype(np.float32)
    y = np.stack([t.label for t in tiles])[:, None, :, :]
    valid = np.stack([t.validity for t in tiles])[:, None, :, :]
    return x, y, valid


def _crop_margin(prob: np.ndarray, margin: int) -> np.ndarray:
    if margin == 0:
        return prob
    return prob[:, :, margin:-margin, margin:-margin]


def _validation_loss(spec, weights, tiles, batch_size, margin, slope) -> float:
    total, count = 0.0, 0
    for start in range(0, len(tiles), batch_size):
        batch = tiles[start:start + batch_size]
        x, y, valid = _stack_batch(batch)
        prob = _crop_margin(forward(spec, weights, x, mode="eval", slope=slope), margin)
        mask = valid != 0
        n = int(np.count_nonzero(mask))
        if n == 0:
            continue
        loss, _ = bce_loss(prob, y.astype(prob.dtype), valid)
        total += loss * n
        count += n
    if count == 0:
        raise DivergenceError("validation set has no valid pixels")
    return total / count


def train(tiles: Sequence[Tile], config: TrainConfig, spec: NetSpec,
          on_batch: Callable[[int, int, Sequence[Tile]], None] | None = None
          ) -> TrainResult:
    """Train on the given tiles and return the lowest-validation-loss checkpoint.

    A validation subset (config.validation_fraction, clamped to at least one
    tile) is carved out first and never contributes a gradient.  Batches are
    reshuffled each epoch with a seed derived from (config.seed, epoch), so a
    fixed config reproduces the run bit for bit.  `on_batch(epoch, batch_index,
    batch_tiles)` is an instrumentation hook for tests.
    """
    if not tiles:
        raise ValueError("empty training corpus")
    expected = tiles[0].window.shape
    halo = halo_of(spec)
    pad = 2 * (halo + config.overlap_margin)
    want = (tiles[0].label.shape[0] + pad, tiles[0].label.shape[1] + pad)
    if expected[1:] != want:
        raise ShapeError(
            f"tile windows are {expected[1]}x{expected[2]} but core "
            f"{tiles[0].label.shape} with halo {halo} and margin "
            f"{config.overlap_margin} needs {want[0]}x{want[1]}"
        )
    for t in tiles:
        if t.window.shape != expected:
            raise ShapeError("tiles have inconsistent window shapes")

    split_seed = int(np.random.SeedSequence((config.seed, 0xBA7C)).generate_state(1)[0])
    train_tiles, val_tiles = split_validation(tiles, config.validation_fraction, split_seed)

    init_seed = int(np.random.SeedSequence((config.seed, 0x1217)).generate_state(1)[0])
    weights = init_weights(spec, init_seed, slope=config.leaky_slope)
    state = init_adam_state(weights)
    margin = config.overlap_margin

    best_loss = np.inf
    best_weights = weights.copy()
    best_epoch = 0
    history: list[dict] = []

    for epoch in range(1, config.epochs + 1):
        t_start = time.perf_counter()
        shuffle_seed = np.random.SeedSequence((config.seed, epoch))
        order = np.random.default_rng(shuffle_seed).permutation(len(train_tiles))
        epoch_losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [train_tiles[i] for i in order[start:start + config.batch_size]]
            if on_batch is not None:
                on_batch(epoch, b, batch)
            x, y, valid = _stack_batch(batch)
            drop_seed = int(
                np.random.SeedSequence((config.seed, epoch, b)).generate_state(1)[0]
            )
            prob, tapes = forward_training(
                spec, weights, x, config.dropout_rate, slope=config.leaky_slope,
                rng_seed=drop_seed,
            )
            prob_core = _crop_margin(prob, margin)
            loss, grad_core = bce_loss(prob_core, y.astype(prob.dtype), valid)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            grad_prob = grad_core
            if margin:
                grad_prob = np.zeros_like(prob)
                grad_prob[:, :, margin:-margin, margin:-margin] = grad_core
            _, grads = backward(spec, weights, tapes, prob, grad_prob,
                                slope=config.leaky_slope)
            adam_step(weights, grads, state, config.learning_rate,
                      config.beta1, config.beta2, config.epsilon)
            epoch_losses.append(loss)

        val_loss = _validation_loss(spec, weights, val_tiles, config.batch_size,
                                    margin, config.leaky_slope)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = weights.copy()
            best_epoch = epoch
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)) if epoch_losses else float("nan"),
            "val_loss": float(val_loss),
            "wall_time_s": time.perf_counter() - t_start,
        })

    ckpt = Checkpoint(spec, best_weights, seed=config.seed, epoch=best_epoch,
                      validation_loss=float(best_loss))
    return TrainResult(ckpt, history)
