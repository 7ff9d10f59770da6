"""
Conway-Maxwell-Poisson series.

S(mu, nu) = sum_n (mu^n / n!)^nu. Everything is summed in log space over
n = 0..cap, with cap = max(1000, mode + 40 sqrt(var)) doubled until the
last term is below 1e-12 of the total.
"""

from __future__ import annotations

import math
import threading
from typing import NamedTuple

import numpy as np
from scipy import special

from src.errors import ConvergenceError, UnsupportedSampler
from src.numerics.quadrature import count_cap

TAIL_TOL = 1e-12
MAX_TERMS = 200_000


class ComPoissonMoments(NamedTuple):
    """Series moments of n under p(n) = (mu^n/n!)^nu / S, with s_n = n theta - log n!."""

    log_s: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    third: np.ndarray
    mean_s: np.ndarray
    cov_ns: np.ndarray
    comoment: np.ndarray


_memo = threading.local()


def _log_terms(theta: np.ndarray, nu: np.ndarray, cap: int):
    n = np.arange(cap + 1, dtype=float)
    s = np.where(n == 0, 0.0, n * theta[:, None]) - special.gammaln(n + 1.0)
    return n, s, nu[:, None] * s


def _certified(logw: np.ndarray, log_s: np.ndarray) -> bool:
    last = logw[:, -1] - log_s
    return bool(np.all((last < math.log(TAIL_TOL)) & (logw[:, -1] <= logw[:, -2])))


def _series(theta: np.ndarray, nu: np.ndarray, max_terms: int = MAX_TERMS):
    rate = np.exp(np.minimum(np.max(theta), 50.0))
    cap = count_cap(rate, rate / max(float(np.min(nu)), 1e-3))
    while cap <= max_terms:
        n, s, logw = _log_terms(theta, nu, cap)
        log_s = special.logsumexp(logw, axis=1)
        if _certified(logw, log_s):
            return n, s, logw, log_s
        cap *= 2
    raise ConvergenceError(f"COM-Poisson series did not meet its tail bound within {max_terms} terms")


def moments(theta, nu) -> ComPoissonMoments:
    """Elementwise series moments for natural parameter theta = log mu and dispersion nu."""

    theta = np.asarray(theta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    shape = np.broadcast(theta, nu).shape
    t = np.broadcast_to(theta, shape).ravel()
    v = np.broadcast_to(nu, shape).ravel()

    key = (shape, t.tobytes(), v.tobytes())
    cached = getattr(_memo, "entry", None)
    if cached is not None and cached[0] == key:
        return cached[1]

    n, s, logw, log_s = _series(t, v)
    p = np.exp(logw - log_s[:, None])
    mean = p @ n
    dn = n[None, :] - mean[:, None]
    mean_s = np.sum(p * s, axis=1)
    ds = s - mean_s[:, None]
    out = ComPoissonMoments(
        log_s=log_s.reshape(shape),
        mean=mean.reshape(shape),
        var=np.sum(p * dn**2, axis=1).reshape(shape),
        third=np.sum(p * dn**3, axis=1).reshape(shape),
        mean_s=mean_s.reshape(shape),
        cov_ns=np.sum(p * dn * ds, axis=1).reshape(shape),
        comoment=np.sum(p * dn**2 * ds, axis=1).reshape(shape),
    )
    _memo.entry = (key, out)
    return out


def com_poisson_log_partition(mu, nu):
    """log S(mu, nu) for mu > 0, nu > 0."""

    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore"):
        theta = np.log(mu)
    return moments(theta, nu).log_s


def approximate_mean(theta, nu):
    """Closed-form mean approximation exp(theta) + 1/(2 nu) - 1/2."""

    return np.exp(theta) + 0.5 / np.asarray(nu, dtype=float) - 0.5


def sample(theta, nu, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws over the certified truncated support."""

    theta = np.asarray(theta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    shape = np.broadcast(theta, nu).shape
    t = np.broadcast_to(theta, shape).ravel()
    v = np.broadcast_to(nu, shape).ravel()
    try:
        n, _, logw, log_s = _series(t, v)
    except ConvergenceError as exc:
        raise UnsupportedSampler(f"COM-Poisson sampler support too large: {exc}") from exc
    cdf = np.cumsum(np.exp(logw - log_s[:, None]), axis=1)
    u = rng.random(t.size)
    idx = np.array([np.searchsorted(row, ui * row[-1]) for row, ui in zip(cdf, u)], dtype=int)
    return n[np.minimum(idx, n.size - 1)].reshape(shape)
