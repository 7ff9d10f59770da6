"""
Maps from the latent value eta to the natural parameter theta.

Each link supplies theta(eta) with three derivatives and the inverse
map theta -> eta. The output-space link g is assembled in
`LikelihoodFamily` from these and the distribution's inverse of b'.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Dict, NamedTuple, Type

import numpy as np
from scipy import special
from scipy.stats import norm

from src.errors import ConfigError, DomainError


class ThetaDerivs(NamedTuple):
    theta: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inverse(s):
    # log(expm1(s)) without overflow for large s
    s = np.asarray(s, dtype=float)
    return s + np.log(-np.expm1(-s))


class Link(ABC):
    name: str = "link"

    @abstractmethod
    def derivs(self, eta) -> ThetaDerivs: ...

    def theta(self, eta):
        return self.derivs(eta).theta

    @abstractmethod
    def inverse(self, theta):
        """eta such that theta(eta) = theta."""

    def dinverse(self, theta):
        """d eta / d theta."""
        return 1.0 / self.derivs(self.inverse(theta)).d1

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Canonical(Link):
    name = "canonical"

    def derivs(self, eta):
        eta = np.asarray(eta, dtype=float)
        zero = np.zeros_like(eta)
        return ThetaDerivs(eta, np.ones_like(eta), zero, zero)

    def inverse(self, theta):
        return np.asarray(theta, dtype=float)


class NegativeExponential(Link):
    """theta = -exp(-eta); keeps theta < 0."""

    name = "negative-exponential"

    def derivs(self, eta):
        e = np.exp(-np.asarray(eta, dtype=float))
        return ThetaDerivs(-e, e, -e, e)

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta >= 0):
            raise DomainError("negative-exponential link needs theta < 0")
        return -np.log(-theta)


class Exponential(Link):
    """theta = exp(eta); keeps theta > 0."""

    name = "exponential"

    def derivs(self, eta):
        e = np.exp(np.asarray(eta, dtype=float))
        return ThetaDerivs(e, e, e, e)

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0):
            raise DomainError("exponential link needs theta > 0")
        return np.log(theta)


class LinearizedLogLoss(Link):
    """theta = log(softplus(eta)); the mean exp(theta) grows linearly in eta."""

    name = "linearized-log-loss"

    def derivs(self, eta):
        eta = np.asarray(eta, dtype=float)
        s = _softplus(eta)
        g = special.expit(eta)
        gp = g * (1.0 - g)
        d1 = g / s
        d2 = (gp * s - g**2) / s**2
        d3 = gp * (1.0 - 2.0 * g) / s - 3.0 * g**2 * (1.0 - g) / s**2 + 2.0 * g**3 / s**3
        return ThetaDerivs(np.log(s), d1, d2, d3)

    def inverse(self, theta):
        return _softplus_inverse(np.exp(np.asarray(theta, dtype=float)))


class FlippedLogLoss(Link):
    """theta = log(sigmoid(eta)); keeps theta < 0."""

    name = "flipped-log-loss"

    def derivs(self, eta):
        eta = np.asarray(eta, dtype=float)
        g = special.expit(eta)
        gp = g * (1.0 - g)
        return ThetaDerivs(-_softplus(-eta), special.expit(-eta), -gp, -gp * (1.0 - 2.0 * g))

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta >= 0):
            raise DomainError("flipped-log-loss link needs theta < 0")
        return -np.log(np.expm1(-theta))


class Logistic(Link):
    """theta = sigmoid(eta); keeps 0 < theta < 1."""

    name = "logistic"

    def derivs(self, eta):
        g = special.expit(np.asarray(eta, dtype=float))
        gp = g * (1.0 - g)
        return ThetaDerivs(g, gp, gp * (1.0 - 2.0 * g), gp * (1.0 - 6.0 * g + 6.0 * g**2))

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any((theta <= 0) | (theta >= 1)):
            raise DomainError("logistic link needs 0 < theta < 1")
        return special.logit(theta)


class Probit(Link):
    """
    theta = log Phi(eta) - log Phi(-eta), so that softplus(theta) = -log(1 - Phi(eta)).

    Mills ratios are formed from log-space normal cdf values, which stay
    accurate in both tails.
    """

    name = "probit"

    def derivs(self, eta):
        eta = np.asarray(eta, dtype=float)
        log_pdf = norm.logpdf(eta)
        lp = special.log_ndtr(eta)
        lq = special.log_ndtr(-eta)
        r1 = np.exp(log_pdf - lp)
        r2 = np.exp(log_pdf - lq)
        d1 = r1 + r2
        dr1 = -r1 * (eta + r1)
        dr2 = r2 * (r2 - eta)
        d2 = dr1 + dr2
        d3 = -dr1 * (eta + r1) - r1 * (1.0 + dr1) + dr2 * (r2 - eta) + r2 * (dr2 - 1.0)
        return ThetaDerivs(lp - lq, d1, d2, d3)

    def inverse(self, theta):
        # Phi(eta) = sigmoid(theta)
        theta = np.asarray(theta, dtype=float)
        return special.ndtri_exp(-_softplus(-theta))


LINKS: Dict[str, Type[Link]] = {
    cls.name: cls
    for cls in (
        Canonical,
        NegativeExponential,
        Exponential,
        LinearizedLogLoss,
        FlippedLogLoss,
        Logistic,
        Probit,
    )
}


def get_link(name: str) -> Link:
    try:
        return LINKS[name]()
    except KeyError:
        raise ConfigError(f"unknown link '{name}'; expected one of {sorted(LINKS)}")
