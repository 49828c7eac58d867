"""The seven-layer fully-convolutional wetland classifier.

Every layer is a valid (unpadded) convolution; the six hidden layers are
followed by leaky ReLU and dropout, the final layer by a sigmoid that emits
a single wetland-probability channel.  Because no padding is used, each
layer eats (k - 1) / 2 pixels per side; the cumulative loss is the "halo"
that tiling code must add around every tile core.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wetlandseg.errors import (
    CheckpointVersionError,
    DataError,
    NotACheckpointError,
    ShapeError,
    TruncatedCheckpointError,
)
from wetlandseg.nn import (
    ConvKernel,
    as_grid4,
    conv2d_backward,
    conv2d_valid,
    dropout,
    dropout_backward,
    leaky_relu,
    leaky_relu_backward,
    sigmoid,
    sigmoid_backward,
)

INPUT_CHANNELS = 3
DEFAULT_KERNEL_SIZES = (9, 9, 7, 7, 7, 5, 5)
DEFAULT_HIDDEN_CHANNELS = (128, 64, 64, 32, 32, 32)
DEFAULT_LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    kernel_size: int
    activated: bool  # leaky ReLU + dropout follow this layer


@dataclass(frozen=True)
class NetSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_channels != b.in_channels:
                raise ShapeError(
                    f"layer chaining broken: {a.out_channels} out-channels feed "
                    f"{b.in_channels} in-channels"
                )

    @property
    def kernel_sizes(self) -> tuple[int, ...]:
        return tuple(layer.kernel_size for layer in self.layers)

    @property
    def hidden_channels(self) -> tuple[int, ...]:
        return tuple(layer.out_channels for layer in self.layers[:-1])


def build_netspec(hidden_channels=DEFAULT_HIDDEN_CHANNELS,
                  kernel_sizes=DEFAULT_KERNEL_SIZES,
                  input_channels=INPUT_CHANNELS) -> NetSpec:
    """Spec for a stack of valid convolutions ending in a 1-channel head."""
    if len(kernel_sizes) != len(hidden_channels) + 1:
        raise ShapeError(
            f"{len(kernel_sizes)} kernel sizes need {len(kernel_sizes) - 1} hidden "
            f"channel counts, got {len(hidden_channels)}"
        )
    chain = (input_channels, *hidden_channels, 1)
    layers = []
    for i, k in enumerate(kernel_sizes):
        layers.append(
            LayerSpec(chain[i], chain[i + 1], k, activated=i < len(kernel_sizes) - 1)
        )
    return NetSpec(tuple(layers))


def default_netspec() -> NetSpec:
    """The standard architecture: kernels 9,9,7,7,7,5,5 over 128,64,64,32,32,32 channels."""
    return build_netspec()


def scaled_hidden_channels(scale: int, floor: int = 8) -> tuple[int, ...]:
    """Hidden channels divided by `scale` with a floor, for reduced desk-scale runs.

    scale=8 gives (16, 8, 8, 8, 8, 8); scale=1 is the default net.
    """
    if scale < 1:
        raise ValueError(f"channel scale must be >= 1, got {scale}")
    return tuple(max(c // scale, floor) for c in DEFAULT_HIDDEN_CHANNELS)


def netspec_for_scale(channel_scale: int) -> NetSpec:
    if channel_scale == 1:
        return default_netspec()
    return build_netspec(hidden_channels=scaled_hidden_channels(channel_scale))


def halo_of(spec: NetSpec) -> int:
    """Per-side pixel loss of the whole stack: sum of (k - 1) / 2 over layers."""
    for layer in spec.layers:
        if layer.kernel_size % 2 == 0:
            raise ShapeError(f"kernel size {layer.kernel_size} is even; halo is undefined")
    return sum((layer.kernel_size - 1) // 2 for layer in spec.layers)


@dataclass
class Weights:
    kernels: list[ConvKernel]

    def copy(self) -> "Weights":
        return Weights([k.copy() for k in self.kernels])

    def validate_against(self, spec: NetSpec) -> None:
        if len(self.kernels) != len(spec.layers):
            raise ShapeError(
                f"{len(self.kernels)} kernels for {len(spec.layers)} layers"
            )
        for i, (kernel, layer) in enumerate(zip(self.kernels, spec.layers)):
            expected = (layer.out_channels, layer.in_channels,
                        layer.kernel_size, layer.kernel_size)
            if kernel.weights.shape != expected:
                raise ShapeError(
                    f"layer {i}: weights shape {kernel.weights.shape}, spec wants {expected}"
                )


def init_weights(spec: NetSpec, seed: int, slope: float = DEFAULT_LEAKY_SLOPE,
                 dtype=np.float32) -> Weights:
    """Zero-mean normal init with variance 2 / ((1 + slope^2) * fan_in); biases zero."""
    seeds = np.random.SeedSequence(seed).spawn(len(spec.layers))
    kernels = []
    for layer, child in zip(spec.layers, seeds):
        rng = np.random.default_rng(child)
        fan_in = layer.in_channels * layer.kernel_size ** 2
        std = np.sqrt(2.0 / ((1.0 + slope ** 2) * fan_in))
        shape = (layer.out_channels, layer.in_channels, layer.kernel_size, layer.kernel_size)
        w = rng.normal(0.0, std, size=shape).astype(dtype)
        b = np.zeros(layer.out_channels, dtype=dtype)
        kernels.append(ConvKernel(w, b))
    return Weights(kernels)


def min_input_size(spec: NetSpec) -> int:
    return 2 * halo_of(spec) + 1


def _check_input(spec: NetSpec, x: np.ndarray) -> None:
    want = spec.layers[0].in_channels
    if x.shape[1] != want:
        raise ShapeError(f"input has {x.shape[1]} channels, network expects {want}")
    minimum = min_input_size(spec)
    if x.shape[2] < minimum or x.shape[3] < minimum:
        raise ShapeError(
            f"input spatial dims {x.shape[2]}x{x.shape[3]} are below the minimum "
            f"{minimum}x{minimum} this architecture can consume"
        )


@dataclass
class LayerTape:
    """Values saved by the training forward pass for the backward pass."""

    x_in: np.ndarray
    pre_activation: np.ndarray | None  # None for the final (unactivated) layer
    mask: np.ndarray | None


def forward(spec: NetSpec, weights: Weights, x: np.ndarray, mode: str = "eval",
            dropout_rate: float = 0.0, slope: float = DEFAULT_LEAKY_SLOPE,
            rng_seed: int = 0) -> np.ndarray:
    prob, _ = _run(spec, weights, x, mode, dropout_rate, slope, rng_seed, keep_tape=False)
    return prob


def forward_training(spec: NetSpec, weights: Weights, x: np.ndarray,
                     dropout_rate: float, slope: float = DEFAULT_LEAKY_SLOPE,
                     rng_seed: int = 0, mode: str = "train"
                     ) -> tuple[np.ndarray, list[LayerTape]]:
    """Forward pass that records per-layer tapes; feed them to backward()."""
    return _run(spec, weights, x, mode, dropout_rate, slope, rng_seed, keep_tape=True)


def _run(spec, weights, x, mode, dropout_rate, slope, rng_seed, keep_tape):
    x = as_grid4(x)
    weights.validate_against(spec)
    _check_input(spec, x)
    layer_seeds = np.random.SeedSequence(rng_seed).generate_state(len(spec.layers))
    tapes: list[LayerTape] = []
    for i, (layer, kernel) in enumerate(zip(spec.layers, weights.kernels)):
        z = conv2d_valid(x, kernel)
        if layer.activated:
            a = leaky_relu(z, slope)
            if mode == "train" and dropout_rate > 0:
                out, mask = dropout(a, dropout_rate, mode, int(layer_seeds[i]))
            else:
                out, mask = a, None
            if keep_tape:
                tapes.append(LayerTape(x, z, mask))
        else:
            out = sigmoid(z)
            if keep_tape:
                tapes.append(LayerTape(x, None, None))
        x = out
    return x, tapes


def backward(spec: NetSpec, weights: Weights, tapes: list[LayerTape], prob: np.ndarray,
             grad_prob: np.ndarray, slope: float = DEFAULT_LEAKY_SLOPE
             ) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Backpropagate d(loss)/d(prob) through the taped forward pass.

    Returns (grad_input, per-layer [(grad_weights, grad_bias), ...]).
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(spec.layers)
    grad = sigmoid_backward(prob, grad_prob)
    for i in reversed(range(len(spec.layers))):
        layer, kernel, tape = spec.layers[i], weights.kernels[i], tapes[i]
        if layer.activated:
            if tape.mask is not None:
                grad = dropout_backward(grad, tape.mask)
            grad = leaky_relu_backward(tape.pre_activation, grad, slope)
        grad, gw, gb = conv2d_backward(tape.x_in, kernel, grad)
        grads[i] = (gw, gb)
    return grad, grads


# --- checkpoint file format ---------------------------------------------
#
# magic "GSKW" | u32 version | u32 layer count
# per layer: u32 in_channels, u32 out_channels, u32 kernel_size
# per layer: weights f32 LE in (out, in, row, col) order, then bias f32 LE
# metadata: u64 seed, u32 epoch, f64 validation loss
# (little-endian throughout; activation flags are implied: all layers but
# the last are activated)

CHECKPOINT_MAGIC = b"GSKW"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    spec: NetSpec
    weights: Weights
    seed: int
    epoch: int
    validation_loss: float
    version: int = CHECKPOINT_VERSION


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    ckpt.weights.validate_against(ckpt.spec)
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<II", ckpt.version, len(ckpt.spec.layers))
    for layer in ckpt.spec.layers:
        blob += struct.pack("<III", layer.in_channels, layer.out_channels, layer.kernel_size)
    for kernel in ckpt.weights.kernels:
        blob += np.ascontiguousarray(kernel.weights, dtype="<f4").tobytes()
        blob += np.ascontiguousarray(kernel.bias, dtype="<f4").tobytes()
    blob += struct.pack("<QId", ckpt.seed, ckpt.epoch, ckpt.validation_loss)
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    offset = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal offset
        if offset + n > len(raw):
            raise TruncatedCheckpointError(
                f"truncated checkpoint: ran out of bytes reading {what}"
            )
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(take(4, "magic")) != CHECKPOINT_MAGIC:
        raise NotACheckpointError(f"{path} is not a checkpoint (bad magic)")
    version, n_layers = struct.unpack("<II", take(8, "header"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    dims = []
    for i in range(n_layers):
        dims.append(struct.unpack("<III", take(12, f"layer {i} dims")))
    layers = tuple(
        LayerSpec(cin, cout, k, activated=i < n_layers - 1)
        for i, (cin, cout, k) in enumerate(dims)
    )
    spec = NetSpec(layers)
    kernels = []
    for i, (cin, cout, k) in enumerate(dims):
        w_bytes = take(4 * cout * cin * k * k, f"layer {i} weights")
        b_bytes = take(4 * cout, f"layer {i} bias")
        w = np.frombuffer(w_bytes, dtype="<f4").reshape(cout, cin, k, k).copy()
        b = np.frombuffer(b_bytes, dtype="<f4").copy()
        kernels.append(ConvKernel(w, b))
    seed, epoch, val_loss = struct.unpack("<QId", take(20, "metadata"))
    if offset != len(raw):
        raise DataError(f"checkpoint has {len(raw) - offset} bytes of trailing data")
    return Checkpoint(spec, Weights(kernels), seed, epoch, val_loss, version)
