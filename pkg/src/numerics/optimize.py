"""First-order minimisation with a line search, recording an accepted-value trace."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.errors import NUMERICAL_FAILURES, LineSearchFailure

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class MinimizeOptions:
    gtol: float = 1e-5
    max_iter: int = 500
    method: str = "L-BFGS-B"
    bounds: Optional[Sequence[Tuple[float, float]]] = None


@dataclass
class OptimizeTrace:
    values: List[float] = field(default_factory=list)
    grad_norm: float = float("nan")
    iterations: int = 0
    evaluations: int = 0
    converged: bool = False
    status: str = "pending"
    message: str = ""


def minimize(
    objective: Objective,
    x0: np.ndarray,
    options: MinimizeOptions = MinimizeOptions(),
) -> Tuple[np.ndarray, OptimizeTrace]:
    """
    Minimise `objective` (value, gradient) from x0.

    Objective failures (raised errors, non-finite values) are reported to
    the line search as +inf so it backtracks. The best finite point is
    always returned; LineSearchFailure is raised only when not even x0
    evaluates.
    """

    trace = OptimizeTrace()
    best = {"x": None, "f": np.inf, "g": None}

    def wrapped(x: np.ndarray) -> Tuple[float, np.ndarray]:
        trace.evaluations += 1
        try:
            f, g = objective(x)
            f = float(f)
            g = np.asarray(g, dtype=float)
        except NUMERICAL_FAILURES as exc:
            logger.debug("objective failed at %s: %s", np.array2string(x, precision=4), exc)
            return np.inf, np.zeros_like(x)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, np.zeros_like(x)
        if f < best["f"]:
            best.update(x=x.copy(), f=f, g=g.copy())
        return f, g

    x0 = np.asarray(x0, dtype=float)
    f0, g0 = wrapped(x0)
    if not np.isfinite(f0):
        raise LineSearchFailure("objective is not finite at the starting point", x=x0, fun=f0, trace=trace)
    trace.values.append(f0)
    if np.linalg.norm(g0, np.inf) < options.gtol:
        trace.grad_norm = float(np.linalg.norm(g0, np.inf))
        trace.converged = True
        trace.status = "converged"
        trace.message = "gradient below tolerance at start"
        return x0, trace

    def callback(intermediate_result: optimize.OptimizeResult) -> None:
        trace.iterations += 1
        trace.values.append(float(intermediate_result.fun))

    opts = {"maxiter": options.max_iter, "gtol": options.gtol}
    result = optimize.minimize(
        wrapped,
        x0,
        jac=True,
        method=options.method,
        bounds=options.bounds if options.method == "L-BFGS-B" else None,
        options=opts,
        callback=callback,
    )

    x_best = best["x"] if best["x"] is not None else x0
    if best["f"] < trace.values[-1]:
        trace.values.append(float(best["f"]))
    g_best = best["g"] if best["g"] is not None else g0
    trace.grad_norm = float(np.linalg.norm(g_best, np.inf))
    trace.message = str(result.message)
    trace.converged = bool(result.success) or trace.grad_norm < options.gtol
    trace.status = "converged" if trace.converged else "stalled"
    if not trace.converged:
        logger.debug("optimizer stopped without convergence: %s", trace.message)
    return x_best, trace
