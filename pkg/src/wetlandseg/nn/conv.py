"""Valid (unpadded) 2D convolution: forward pass and analytic gradients.

Two interchangeable implementations exist:

* ``compiled`` -- Cython kernels from ``_convkernels`` (built by setup.py),
* ``numpy``   -- stride-tricks windows reduced with BLAS-backed tensordot.

The default is chosen at import time: compiled when the extension built,
numpy otherwise.  Override with the ``WETLANDSEG_CONV_BACKEND`` environment
variable or the ``backend=`` argument; ``benchmarks/bench_conv.py`` compares
the two.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import as_strided

from wetlandseg.errors import ShapeError
from wetlandseg.nn.grid import ConvKernel, as_grid4

try:
    from wetlandseg.nn import _convkernels as _compiled
except ImportError:
    _compiled = None


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    """View of every kxk patch of x: shape (n, c, h-k+1, w-k+1, k, k)."""
    n, c, h, w = x.shape
    sn, sc, sh, sw = x.strides
    return as_strided(
        x,
        shape=(n, c, h - k + 1, w - k + 1, k, k),
        strides=(sn, sc, sh, sw, sh, sw),
        writeable=False,
    )


def _forward_numpy(x, w, b):
    k = w.shape[2]
    n = x.shape[0]
    h_out, w_out = x.shape[2] - k + 1, x.shape[3] - k + 1
    out = np.empty((n, w.shape[0], h_out, w_out), dtype=x.dtype)
    wins = _windows(x, k)
    # one GEMM per sample keeps the im2col copy small
    for i in range(n):
        out[i] = np.tensordot(w, wins[i], axes=([1, 2, 3], [0, 3, 4]))
    out += b[None, :, None, None]
    return out


def _backward_numpy(x, w, grad_out):
    k = w.shape[2]
    n, _, h_out, w_out = grad_out.shape
    grad_x = np.zeros_like(x)
    grad_w = np.zeros_like(w)
    wins = _windows(x, k)
    for i in range(n):
        grad_w += np.tensordot(grad_out[i], wins[i], axes=([1, 2], [1, 2]))
    for ki in range(k):
        for kj in range(k):
            # (n, h_out, w_out, c_in) contribution of kernel tap (ki, kj)
            contrib = np.tensordot(grad_out, w[:, :, ki, kj], axes=([1], [0]))
            grad_x[:, :, ki:ki + h_out, kj:kj + w_out] += contrib.transpose(0, 3, 1, 2)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def _forward_compiled(x, w, b):
    k = w.shape[2]
    out = np.empty(
        (x.shape[0], w.shape[0], x.shape[2] - k + 1, x.shape[3] - k + 1), dtype=x.dtype
    )
    _compiled.conv2d_forward(x, w, b, out)
    return out


def _backward_compiled(x, w, grad_out):
    grad_x = np.zeros_like(x)
    grad_w = np.zeros_like(w)
    grad_b = np.zeros(w.shape[0], dtype=w.dtype)
    _compiled.conv2d_backward_input(grad_out, w, grad_x)
    _compiled.conv2d_backward_weights(x, grad_out, grad_w, grad_b)
    return grad_x, grad_w, grad_b


_IMPLS = {"numpy": (_forward_numpy, _backward_numpy)}
if _compiled is not None:
    _IMPLS["compiled"] = (_forward_compiled, _backward_compiled)


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def _select_default() -> str:
    choice = os.environ.get("WETLANDSEG_CONV_BACKEND", "auto")
    if choice == "auto":
        return "compiled" if _compiled is not None else "numpy"
    if choice not in _IMPLS:
        raise ImportError(
            f"WETLANDSEG_CONV_BACKEND={choice!r} is not available; "
            f"choose from {available_backends()}"
        )
    return choice


_DEFAULT_BACKEND = _select_default()


def active_backend() -> str:
    """Name of the convolution implementation used by default."""
    return _DEFAULT_BACKEND


@contextmanager
def force_backend(name: str):
    """Temporarily switch the default implementation (tests and benchmarks)."""
    global _DEFAULT_BACKEND
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    previous = _DEFAULT_BACKEND
    _DEFAULT_BACKEND = name
    try:
        yield
    finally:
        _DEFAULT_BACKEND = previous


def _check_forward_shapes(x, kernel):
    if x.shape[1] != kernel.in_channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels but kernel expects {kernel.in_channels}"
        )
    k = kernel.size
    if x.shape[2] < k or x.shape[3] < k:
        raise ShapeError(
            f"input spatial dims {x.shape[2]}x{x.shape[3]} are smaller than the "
            f"{k}x{k} kernel"
        )


def conv2d_valid(x: np.ndarray, kernel: ConvKernel, backend: str | None = None) -> np.ndarray:
    """Valid convolution; output spatial dims shrink by k - 1 per axis."""
    x = as_grid4(x)
    _check_forward_shapes(x, kernel)
    if x.dtype != kernel.weights.dtype:
        raise ShapeError(
            f"input dtype {x.dtype} does not match kernel dtype {kernel.weights.dtype}"
        )
    forward, _ = _IMPLS[backend or _DEFAULT_BACKEND]
    return forward(x, kernel.weights, kernel.bias)


def conv2d_backward(
    x: np.ndarray,
    kernel: ConvKernel,
    grad_out: np.ndarray,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_valid w.r.t. input, weights and bias.

    grad_out must have the forward output's shape; returns
    (grad_input, grad_weights, grad_bias).
    """
    x = as_grid4(x)
    grad_out = as_grid4(grad_out, "grad_out")
    _check_forward_shapes(x, kernel)
    k = kernel.size
    expected = (x.shape[0], kernel.out_channels, x.shape[2] - k + 1, x.shape[3] - k + 1)
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match {expected}")
    if grad_out.dtype != x.dtype:
        raise ShapeError(f"grad_out dtype {grad_out.dtype} does not match input {x.dtype}")
    _, backward = _IMPLS[backend or _DEFAULT_BACKEND]
    return backward(x, kernel.weights, grad_out)


def conv2d_valid_naive(x: np.ndarray, kernel: ConvKernel) -> np.ndarray:
    """Literal quadruple-loop convolution. Test oracle only; never optimized."""
    x = as_grid4(x)
    _check_forward_shapes(x, kernel)
    w, b = kernel.weights, kernel.bias
    n, c_in, h, width = x.shape
    k = kernel.size
    h_out, w_out = h - k + 1, width - k + 1
    out = np.zeros((n, kernel.out_channels, h_out, w_out), dtype=x.dtype)
    for sample in range(n):
        for co in range(kernel.out_channels):
            for i in range(h_out):
                for j in range(w_out):
                    acc = b[co]
                    for ci in range(c_in):
                        for ki in range(k):
                            for kj in range(k):
                                acc += x[sample, ci, i + ki, j + kj] * w[co, ci, ki, kj]
                    out[sample, co, i, j] = acc
    return out
