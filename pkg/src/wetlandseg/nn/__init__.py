"""Dense 4-axis array math: hand-written forward and backward passes."""

from wetlandseg.nn.conv import (
    active_backend,
    available_backends,
    conv2d_backward,
    conv2d_valid,
    conv2d_valid_naive,
)
from wetlandseg.nn.grid import ConvKernel, as_grid4
from wetlandseg.nn.gradcheck import GradCheckReport, grad_check
from wetlandseg.nn.ops import (
    BCE_EPS,
    bce_loss,
    dropout,
    dropout_backward,
    leaky_relu,
    leaky_relu_backward,
    sigmoid,
    sigmoid_backward,
)

__all__ = [
    "BCE_EPS",
    "ConvKernel",
    "GradCheckReport",
    "active_backend",
    "as_grid4",
    "available_backends",
    "bce_loss",
    "conv2d_backward",
    "conv2d_valid",
    "conv2d_valid_naive",
    "dropout",
    "dropout_backward",
    "grad_check",
    "leaky_relu",
    "leaky_relu_backward",
    "sigmoid",
    "sigmoid_backward",
]
