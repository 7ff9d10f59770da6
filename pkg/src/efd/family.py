"""A distribution paired with a link and a dispersion value."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from src.efd.distributions import Distribution, Support
from src.efd.links import Link
from src.errors import ConfigError, DomainError, OverflowGuard, SingularCurvature, UndefinedPoint

logger = logging.getLogger(__name__)


class LogLikDerivs(NamedTuple):
    """log p(y | theta(eta)) and its first three eta-derivatives."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


class DispersionPartials(NamedTuple):
    """phi-partials of log p, d/d eta log p and d2/d eta2 log p at fixed eta."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class LikelihoodFamily:
    """
    log p(y | eta) = (T(y) theta(eta) - b(theta(eta))) / a(phi) + c(phi, y)

    - `offset` is added to count outputs when forming expansion points only.
    - `agnostic` families (binomial) expand at eta = 0 instead of g(T(y)).
    - Families whose distribution fixes the dispersion ignore `phi`.
    """

    id: str
    dist: Distribution
    link: Link
    phi: float = 1.0
    offset: float = 0.0
    agnostic: bool = False

    def __post_init__(self):
        fixed = self.dist.fixed_dispersion
        if fixed is not None:
            object.__setattr__(self, "phi", float(fixed))
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise ConfigError(f"dispersion must be positive, got {self.phi!r}")
        if not self.offset >= 0:
            raise ConfigError(f"offset must be >= 0, got {self.offset!r}")

    # ------------------------------------------------------------------
    # Identity
    # ------------------------------------------------------------------

    @property
    def has_dispersion(self) -> bool:
        """True when phi is a free parameter."""
        return self.dist.fixed_dispersion is None

    @property
    def support(self) -> Support:
        return self.dist.support

    @property
    def discrete(self) -> bool:
        return self.dist.support in (Support.COUNT, Support.FRACTION)

    def with_dispersion(self, phi: float) -> "LikelihoodFamily":
        if not self.has_dispersion:
            return self
        return dataclasses.replace(self, phi=float(phi))

    # ------------------------------------------------------------------
    # Likelihood and derivatives
    # ------------------------------------------------------------------

    def check_support(self, y) -> None:
        self.dist.check_support(y)

    def theta(self, eta):
        return self.link.theta(eta)

    def log_likelihood(self, y, eta, strict: bool = True):
        """
        log p(y | theta(eta), phi).

        With strict=False non-finite values are returned as they are
        (quadrature integrands treat them as zero density).
        """

        if strict:
            self.check_support(y)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            theta = self.link.theta(eta)
            t = self.dist.stat(y)
            out = (t * theta - self.dist.b(theta, self.phi)) / self.dist.a(self.phi) + self.dist.c(y, self.phi)
        if strict and not np.all(np.isfinite(out)):
            raise OverflowGuard(f"{self.id}: log-likelihood is not representable at the given eta")
        return out

    def derivatives(self, y, eta) -> LogLikDerivs:
        th = self.link.derivs(eta)
        t = self.dist.stat(y)
        a = self.dist.a(self.phi)
        b1 = self.dist.b1(th.theta, self.phi)
        b2 = self.dist.b2(th.theta, self.phi)
        b3 = self.dist.b3(th.theta, self.phi)
        resid = t - b1
        value = (t * th.theta - self.dist.b(th.theta, self.phi)) / a + self.dist.c(y, self.phi)
        d1 = th.d1 * resid / a
        d2 = (th.d2 * resid - b2 * th.d1**2) / a
        d3 = (th.d3 * resid - 3.0 * th.d2 * th.d1 * b2 - th.d1**3 * b3) / a
        return LogLikDerivs(value, d1, d2, d3)

    def derivative_functions(self, y, eta) -> Tuple[np.ndarray, np.ndarray]:
        """(u, w) = (d/d eta log p, -1 / d2/d eta2 log p)."""

        d = self.derivatives(y, eta)
        if np.any(d.d2 == 0):
            i = int(np.flatnonzero(np.ravel(d.d2 == 0))[0])
            raise SingularCurvature(f"{self.id}: zero curvature at observation {i}; choose another expansion point")
        return d.d1, -1.0 / d.d2

    def dispersion_partials(self, y, eta) -> DispersionPartials:
        th = self.link.derivs(eta)
        shape = np.broadcast(np.asarray(y, dtype=float), th.theta).shape
        if not self.has_dispersion:
            zero = np.zeros(shape)
            return DispersionPartials(zero, zero, zero)
        phi = self.phi
        dist = self.dist
        t = dist.stat(y)
        a = dist.a(phi)
        ratio = dist.da(phi) / a
        resid = t - dist.b1(th.theta, phi)
        d2 = (th.d2 * resid - dist.b2(th.theta, phi) * th.d1**2) / a
        value = -ratio / a * (t * th.theta - dist.b(th.theta, phi)) - dist.db_dphi(th.theta, phi) / a + dist.dc_dphi(y, phi)
        d1 = -ratio / a * th.d1 * resid - th.d1 * dist.db1_dphi(th.theta, phi) / a
        dd2 = -ratio * d2 + (-th.d2 * dist.db1_dphi(th.theta, phi) - th.d1**2 * dist.db2_dphi(th.theta, phi)) / a
        return DispersionPartials(
            np.broadcast_to(value, shape), np.broadcast_to(d1, shape), np.broadcast_to(dd2, shape)
        )

    # ------------------------------------------------------------------
    # Expansion points and links in output space
    # ------------------------------------------------------------------

    def _expansion_mean(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.dist.support == Support.UNIT and np.any((y <= 0) | (y >= 1)):
            raise UndefinedPoint(f"{self.id}: expansion point undefined for y on the boundary of (0, 1)")
        if self.dist.support == Support.COUNT:
            y = y + self.offset
        with np.errstate(divide="ignore"):
            return self.dist.stat(y)

    def canonical_expansion_point(self, y) -> np.ndarray:
        """eta~ = g(T(y)); zero for agnostic families."""

        y = np.asarray(y, dtype=float)
        if self.agnostic:
            return np.zeros_like(y)
        theta = self.dist.mean_inverse(self._expansion_mean(y), self.phi)
        try:
            return self.link.inverse(theta)
        except DomainError as exc:
            raise UndefinedPoint(f"{self.id}: {exc}") from exc

    def expansion_point_dphi(self, y) -> np.ndarray:
        """d eta~ / d phi for the canonical expansion point."""

        y = np.asarray(y, dtype=float)
        if self.agnostic or not self.has_dispersion or not self.dist.dispersion_dependent:
            return np.zeros_like(y)
        mean = self._expansion_mean(y)
        theta = self.dist.mean_inverse(mean, self.phi)
        return self.dist.dmean_inverse_dphi(mean, self.phi) * self.link.dinverse(theta)

    def link_function(self, mean):
        """g: mean of T(y) -> eta."""
        return self.link.inverse(self.dist.mean_inverse(mean, self.phi))

    def inverse_link(self, eta):
        """g^-1: eta -> mean of T(y)."""
        return self.dist.b1(self.link.theta(eta), self.phi)

    # ------------------------------------------------------------------
    # Moments and sampling
    # ------------------------------------------------------------------

    def mean_and_variance(self, eta) -> Tuple[np.ndarray, np.ndarray]:
        """(b'(theta), b''(theta) a(phi)): moments of the sufficient statistic."""

        theta = self.link.theta(eta)
        if np.any(~self.dist.valid_theta(theta)):
            raise DomainError(f"{self.id}: theta left its valid range")
        return self.dist.b1(theta, self.phi), self.dist.b2(theta, self.phi) * self.dist.a(self.phi)

    def output_moments(self, eta) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and variance of y itself."""

        theta = self.link.theta(eta)
        return self.dist.output_mean(theta, self.phi), self.dist.output_variance(theta, self.phi)

    def sample_output(self, eta, rng: np.random.Generator):
        theta = self.link.theta(eta)
        if np.any(~self.dist.valid_theta(theta)):
            raise DomainError(f"{self.id}: theta left its valid range")
        return self.dist.sample(theta, self.phi, rng)

    def support_grid(self, mean: float, var: float) -> np.ndarray:
        """Enumerable outputs covering the mass of a discrete predictive."""

        if self.dist.support == Support.FRACTION:
            n = self.dist.trials
            return np.arange(n + 1, dtype=float) / n
        if self.dist.support == Support.COUNT:
            hi = max(50.0, mean + 40.0 * np.sqrt(max(var, 0.0)) + 20.0)
            return np.arange(int(np.ceil(hi)) + 1, dtype=float)
        raise DomainError(f"{self.id}: support is continuous")
