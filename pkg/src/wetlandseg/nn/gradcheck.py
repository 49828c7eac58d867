"""Central finite-difference verification of analytic gradients.

Everything here expects float64: at 32-bit the difference quotient noise
would swamp the tolerances this check is meant to enforce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class GradCheckReport:
    """Max relative error between analytic and numerical gradient, per input."""

    max_rel_err: dict[str, float] = field(default_factory=dict)
    step: float = 1e-6

    @property
    def worst(self) -> float:
        return max(self.max_rel_err.values()) if self.max_rel_err else 0.0

    def passed(self, tolerance: float) -> bool:
        return self.worst < tolerance

    def __str__(self) -> str:
        parts = ", ".join(f"{k}={v:.3e}" for k, v in self.max_rel_err.items())
        return f"GradCheckReport(worst={self.worst:.3e}; {parts})"


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def grad_check(
    fn: Callable[[Sequence[np.ndarray]], float],
    inputs: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    names: Sequence[str] | None = None,
    step: float = 1e-6,
    samples: int | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of a scalar function against central differences.

    fn maps the input list to a scalar; analytic[i] is the claimed gradient
    w.r.t. inputs[i].  With samples=None every coordinate is perturbed;
    otherwise the `samples` largest-|gradient| coordinates per input are
    probed (for large parameter tensors exhaustive probing is too slow, and
    near-zero gradients sit below the difference-quotient noise floor).
    """
    if len(analytic) != len(inputs):
        raise ValueError("need one analytic gradient per input")
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    names = list(names) if names is not None else [f"input{i}" for i in range(len(inputs))]
    report = GradCheckReport(step=step)

    for x, g, name in zip(inputs, analytic, names):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != x.shape:
            raise ValueError(f"analytic gradient for {name} has shape {g.shape}, want {x.shape}")
        flat_idx = np.arange(x.size)
        if samples is not None and samples < x.size:
            flat_idx = np.argsort(np.abs(g.reshape(-1)))[-samples:]
        worst = 0.0
        xf = x.reshape(-1)
        for idx in flat_idx:
            orig = xf[idx]
            xf[idx] = orig + step
            f_plus = fn(inputs)
            xf[idx] = orig - step
            f_minus = fn(inputs)
            xf[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            worst = max(worst, _rel_err(float(g.reshape(-1)[idx]), numeric))
        report.max_rel_err[name] = worst
    return report
