from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np


@dataclass(frozen=True)
class GradientCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    relative_error: np.ndarray

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_error)) if self.relative_error.size else 0.0


def check_gradient(
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x: np.ndarray,
    step: float = 1e-5,
    floor: float = 1e-6,
) -> GradientCheck:
    """
    Compare an analytic gradient with central differences.

    Per-coordinate step is step * max(1, |x_j|); the relative error
    uses max(|analytic|, |numeric|, floor) as denominator.
    """

    x = np.asarray(x, dtype=float)
    _, analytic = objective(x)
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.zeros_like(x)
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        numeric[j] = (objective(xp)[0] - objective(xm)[0]) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return GradientCheck(analytic, numeric, np.abs(analytic - numeric) / denom)
