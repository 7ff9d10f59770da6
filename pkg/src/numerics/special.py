"""Polygamma functions, their inverse, and a bracketed Newton solver."""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np
from scipy import special

from src.errors import ConvergenceError, DomainError

ArrayLike = np.ndarray | float


def polygamma(k: int, x: ArrayLike) -> np.ndarray:
    """psi_k(x) for k in {0, 1, 2}; x must be positive."""

    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"polygamma requires x > 0, got min {np.min(x)!r}")
    if k == 0:
        return special.digamma(x)
    if k in (1, 2):
        return special.polygamma(k, x)
    raise DomainError(f"polygamma order {k} is not supported")


def inverse_digamma(z: ArrayLike, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
    """
    Solve psi_0(x) = z for x > 0.

    Newton iteration seeded with the log approximation
    (exp(z) + 1/2 above the crossover, -1/(z + gamma) below).
    """

    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(z >= -2.22, np.exp(z) + 0.5, -1.0 / (z - special.digamma(1.0)))

    for _ in range(max_iter):
        step = (special.digamma(x) - z) / special.polygamma(1, x)
        x_new = x - step
        # Newton on the concave psi_0 never overshoots below zero from the
        # seeds above, but halve towards zero if it does.
        x_new = np.where(x_new <= 0, x / 2.0, x_new)
        if np.all(np.abs(x_new - x) <= tol * np.maximum(1.0, np.abs(x_new))):
            return x_new
        x = x_new
    raise ConvergenceError("inverse_digamma did not converge")


def solve_increasing(
    func: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    x0: ArrayLike,
    lo: float,
    hi: float,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> np.ndarray:
    """
    Elementwise root of an increasing function on [lo, hi].

    `func` returns (value, derivative). Newton steps that leave the
    current bracket fall back to bisection.
    """

    x = np.clip(np.asarray(x0, dtype=float).copy(), lo, hi)
    a = np.full_like(x, lo)
    b = np.full_like(x, hi)

    for _ in range(max_iter):
        f, df = func(x)
        a = np.where(f < 0, x, a)
        b = np.where(f > 0, x, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / df
        inside = np.isfinite(newton) & (newton > a) & (newton < b)
        x_new = np.where(inside, newton, 0.5 * (a + b))
        x_new = np.where(f == 0, x, x_new)
        if np.all(np.abs(x_new - x) <= tol * np.maximum(1.0, np.abs(x))):
            return x_new
        x = x_new
    raise ConvergenceError("bracketed Newton solve did not converge")
