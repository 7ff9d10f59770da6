"""
Gaussian and count-support expectations.

Gauss-Hermite nodes are used in probabilists' form: for
eta ~ N(m, v), E[f(eta)] ~= sum_k w_k f(m + sqrt(v) z_k) with
sum_k w_k = 1. The adaptive scheme doubles the order until two
successive estimates agree, and can recentre the rule on a
Laplace approximation of the integrand (tilted integrals). Tilted
integrals whose tails defeat the Hermite rule at every order are
finished by adaptive integration on the line.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from src.errors import ConvergenceError, NonFinite

logger = logging.getLogger(__name__)

MAX_ORDER = 321


@dataclass(frozen=True)
class GaussianExpectationPlan:
    order: int = 61
    scheme: Literal["gauss-hermite", "adaptive"] = "gauss-hermite"
    tolerance: float = 1e-10
    max_order: int = MAX_ORDER

    def adaptive(self) -> "GaussianExpectationPlan":
        return GaussianExpectationPlan(self.order, "adaptive", self.tolerance, self.max_order)


@lru_cache(maxsize=32)
def hermite_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for expectations under N(0, 1)."""

    x, w = np.polynomial.hermite.hermgauss(order)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _orders(plan: GaussianExpectationPlan) -> Sequence[int]:
    if plan.scheme == "gauss-hermite":
        return [plan.order]
    orders = []
    order = plan.order
    while order <= plan.max_order:
        orders.append(order)
        order = 2 * order - 1
    return orders


def _converged(new: np.ndarray, old: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.abs(new - old) <= tol * np.maximum(1.0, np.abs(new))))


def gaussian_expect(
    f: Callable[[np.ndarray], np.ndarray],
    m: np.ndarray | float,
    v: np.ndarray | float,
    plan: GaussianExpectationPlan = GaussianExpectationPlan(),
) -> np.ndarray:
    """
    E[f(eta)] for eta ~ N(m, v), elementwise over the shapes of m and v.

    `f` receives an array with one trailing node axis and must return
    an array of the same shape.
    """

    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    previous = None
    for order in _orders(plan):
        z, w = hermite_rule(order)
        eta = m[..., None] + np.sqrt(v)[..., None] * z
        vals = np.asarray(f(eta), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonFinite("integrand returned a non-finite value at a quadrature node")
        estimate = vals @ w
        if previous is not None and _converged(estimate, previous, plan.tolerance):
            return estimate
        previous = estimate
    if plan.scheme == "adaptive":
        logger.warning("adaptive Gauss-Hermite stalled at order %d; using the last estimate", plan.max_order)
    return previous


def _log_normal(x: np.ndarray, m: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -0.5 * np.log(2.0 * np.pi * v) - 0.5 * (x - m) ** 2 / v


def tilted_expect(
    loglik: Callable[[np.ndarray], np.ndarray],
    m: np.ndarray | float,
    v: np.ndarray | float,
    plan: GaussianExpectationPlan = GaussianExpectationPlan(),
    center: np.ndarray | float | None = None,
    spread: np.ndarray | float | None = None,
    extras: Sequence[Callable[[np.ndarray], np.ndarray]] = (),
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """
    Moments of the tilted density exp(loglik(eta)) N(eta | m, v).

    Returns (log Z, mean, variance, [E_tilted[g] for g in extras]).
    With `center`/`spread` the rule is placed on N(center, spread)
    and importance-reweighted, which keeps sharply peaked
    likelihoods resolved at moderate order.
    """

    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    c = m if center is None else np.asarray(center, dtype=float)
    s = v if spread is None else np.asarray(spread, dtype=float)

    previous = None
    result = None
    for order in _orders(plan):
        z, w = hermite_rule(order)
        eta = c[..., None] + np.sqrt(s)[..., None] * z
        with np.errstate(over="ignore", invalid="ignore"):
            logvals = np.asarray(loglik(eta), dtype=float)
        logvals = np.where(np.isnan(logvals), -np.inf, logvals)
        if np.any(logvals == np.inf):
            raise NonFinite("log-likelihood is +inf at a quadrature node")
        with np.errstate(divide="ignore"):
            logterms = np.log(w) + logvals
        if center is not None or spread is not None:
            logterms = logterms + _log_normal(eta, m[..., None], v[..., None]) - _log_normal(
                eta, c[..., None], s[..., None]
            )
        log_z = logsumexp(logterms, axis=-1)
        if not np.all(np.isfinite(log_z)):
            raise NonFinite("tilted normaliser underflowed at every quadrature node")
        p = np.exp(logterms - log_z[..., None])
        mean = np.sum(p * eta, axis=-1)
        var = np.sum(p * (eta - mean[..., None]) ** 2, axis=-1)
        with np.errstate(invalid="ignore", over="ignore"):
            extra_vals = [
                np.sum(np.where(p > 0, p * np.asarray(g(eta), dtype=float), 0.0), axis=-1)
                for g in extras
            ]
        result = (log_z, mean, var, extra_vals)
        # log Z, mean and variance live on different scales; compare each
        # on its own mixed absolute/relative footing.
        current = np.concatenate([np.atleast_1d(log_z), np.atleast_1d(mean), np.atleast_1d(np.sqrt(var))])
        if previous is not None and _converged(current, previous, plan.tolerance):
            return result
        previous = current
    if plan.scheme == "gauss-hermite":
        return result
    logger.debug("tilted Gauss-Hermite stalled at order %d; switching to adaptive integration", plan.max_order)
    return _tilted_by_integration(loglik, m, v, c, s, extras, plan.tolerance)


def _tilted_by_integration(loglik, m, v, center, spread, extras, tol):
    """
    Tilted moments by globally adaptive integration over the whole line.

    The variable is standardised on (center, spread) and the integrand is
    scaled by its value at the center, so every element is a unit-width
    bump of height one near t = 0.
    """

    sigma = np.sqrt(spread)

    def logterm(eta):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            vals = np.asarray(loglik(eta), dtype=float)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        return vals + _log_normal(eta, m[..., None], v[..., None])

    ref = logterm(center[..., None])[..., 0]
    if not np.all(np.isfinite(ref)):
        raise NonFinite("tilted density vanishes at its own mode")

    def integrand(t):
        eta = (center + sigma * t)[..., None]
        with np.errstate(over="ignore", under="ignore"):
            p = np.exp(logterm(eta)[..., 0] - ref)
        rows = [p, p * t, p * t * t]
        for g in extras:
            with np.errstate(all="ignore"):
                gv = np.asarray(g(eta), dtype=float)[..., 0]
            rows.append(np.where(p > 0, p * gv, 0.0))
        return np.stack(rows)

    vals, _ = integrate.quad_vec(integrand, -np.inf, np.inf, epsabs=1e-14, epsrel=tol, norm="max")
    if not np.all(np.isfinite(vals)) or np.any(vals[0] <= 0):
        raise NonFinite("adaptive integration of the tilted density failed")
    mass = vals[0]
    t_mean = vals[1] / mass
    t_var = np.maximum(vals[2] / mass - t_mean**2, 0.0)
    log_z = ref + np.log(mass) + np.log(sigma)
    return log_z, center + sigma * t_mean, spread * t_var, [row / mass for row in vals[3:]]


def count_cap(mode: float, var: float) -> int:
    return int(max(1000.0, mode + 40.0 * math.sqrt(max(var, 0.0))))


def discrete_expect(
    f: Callable[[np.ndarray], np.ndarray],
    log_weight: Callable[[np.ndarray], np.ndarray],
    mode: float = 0.0,
    var: float = 1.0,
    tail_tol: float = 1e-12,
    max_terms: int = 2_000_000,
) -> float:
    """
    sum_n f(n) exp(log_weight(n)) over n = 0, 1, 2, ...

    The sum starts at max(1000, mode + 40 sqrt(var)) terms and doubles
    until the last term is below `tail_tol` relative to the total.
    """

    cap = count_cap(mode, var)
    while cap <= max_terms:
        n = np.arange(cap + 1, dtype=float)
        logw = np.asarray(log_weight(n), dtype=float)
        total_logw = logsumexp(logw)
        # Tail certificate: last term relative to the mass, decreasing at the end.
        if logw[-1] - total_logw < math.log(tail_tol) and logw[-1] <= logw[-2]:
            return float(np.sum(np.asarray(f(n), dtype=float) * np.exp(logw)))
        cap *= 2
    raise ConvergenceError(f"count-support sum did not meet its tail bound within {max_terms} terms")
