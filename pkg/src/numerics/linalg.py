"""PSD factorisations with a jitter-escalation policy."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.errors import NotPSD

logger = logging.getLogger(__name__)

JITTER_START = 1e-8
JITTER_STOP = 1e-2


@dataclass(frozen=True)
class PsdFactor:
    """Lower Cholesky factor of A (+ jitter I) and log|A|."""

    lower: np.ndarray
    logdet: float
    jitter: float = 0.0

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.lower, True), b)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.lower.shape[0]))


def psd_factor(a: np.ndarray, allow_jitter: bool = True) -> PsdFactor:
    """
    Cholesky of a symmetric matrix.

    On failure, jitter starting at 1e-8 * mean(diag) is added and
    raised x10 up to 1e-2 * mean(diag); NotPSD after that.
    """

    a = np.asarray(a, dtype=float)
    a = 0.5 * (a + a.T)
    scale = float(np.mean(np.abs(np.diag(a)))) or 1.0
    jitter = 0.0
    while True:
        try:
            lower = linalg.cholesky(a + jitter * np.eye(a.shape[0]), lower=True)
            if jitter > 0:
                logger.debug("cholesky succeeded with jitter %.3g", jitter)
            return PsdFactor(lower, 2.0 * float(np.sum(np.log(np.diag(lower)))), jitter)
        except linalg.LinAlgError:
            if not allow_jitter:
                raise NotPSD("matrix is not positive definite")
            jitter = JITTER_START * scale if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_STOP * scale * (1 + 1e-9):
                raise NotPSD("matrix is not positive definite after jitter escalation")


def psd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return psd_factor(a).solve(b)


def psd_logdet(a: np.ndarray) -> float:
    return psd_factor(a).logdet


@dataclass(frozen=True)
class SiteForm:
    """
    Quantities of a Gaussian posterior with prior N(0, K) and diagonal
    site precisions pi:

    gain   = (K + diag(pi)^-1)^-1, well defined for pi_i = 0
    cov    = (K^-1 + diag(pi))^-1 = K - K gain K
    logdet = log|I + K diag(pi)|
    """

    gain: np.ndarray
    cov: np.ndarray
    logdet: float


def site_form(k: np.ndarray, precision: np.ndarray) -> SiteForm:
    """
    Posterior algebra in the B = I + sW K sW form (sW = sqrt(pi)).

    Negative precisions (non-log-concave Laplace modes) fall back to an
    LU factorisation of I + diag(pi) K.
    """

    precision = np.asarray(precision, dtype=float)
    n = k.shape[0]
    if np.all(precision >= 0):
        sw = np.sqrt(precision)
        b = np.eye(n) + sw[:, None] * k * sw[None, :]
        fac = psd_factor(b)
        gain = sw[:, None] * fac.solve(np.diag(sw))
        v = linalg.solve_triangular(fac.lower, sw[:, None] * k, lower=True)
        cov = k - v.T @ v
        return SiteForm(0.5 * (gain + gain.T), 0.5 * (cov + cov.T), fac.logdet)

    m = np.eye(n) + precision[:, None] * k
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise NotPSD("posterior precision is not positive definite")
    gain = np.linalg.solve(m, np.diag(precision))
    cov = k - k @ gain @ k
    return SiteForm(0.5 * (gain + gain.T), 0.5 * (cov + cov.T), float(logdet))
