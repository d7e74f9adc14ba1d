"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckReport:
    max_abs_error: float
    max_rel_error: float
    worst_index: int
    passed: bool

    def __str__(self):
        tag = "pass" if self.passed else "FAIL"
        return (f"[{tag}] max_abs={self.max_abs_error:.3e} "
                f"max_rel={self.max_rel_error:.3e} at flat index {self.worst_index}")


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor,
               eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare the tape gradient of a scalar function against central differences.

    x must be float64. Relative errors are measured against the largest
    gradient magnitude seen across all coordinates, so coordinates whose
    true gradient is zero do not blow up the ratio.
    """
    if x.dtype != np.float64:
        raise ValueError("grad_check requires a float64 input")

    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    if out.data.size != 1:
        raise ValueError(f"grad_check target must return a scalar, got shape {out.shape}")
    backward(out)
    analytic = probe.grad.reshape(-1).copy()

    flat = x.data.reshape(-1)
    numeric = np.empty_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(Tensor(x.data.copy())).data)
            flat[i] = orig - eps
            lo = float(f(Tensor(x.data.copy())).data)
            flat[i] = orig
            numeric[i] = (hi - lo) / (2.0 * eps)

    abs_err = np.abs(analytic - numeric)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    rel_err = abs_err / scale
    worst = int(rel_err.argmax()) if rel_err.size else 0
    max_rel = float(rel_err.max(initial=0.0))
    return GradCheckReport(
        max_abs_error=float(abs_err.max(initial=0.0)),
        max_rel_error=max_rel,
        worst_index=worst,
        passed=bool(max_rel <= tol),
    )
