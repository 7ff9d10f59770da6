"""
Single-parameter exponential-family distributions.

Each distribution is written in the form

    log p(y | theta, phi) = (T(y) theta - b(theta)) / a(phi) + c(phi, y)

and supplies b and its first three theta-derivatives, the dispersion
partials used by the marginal-likelihood gradients, the inverse of b',
and a sampler. All methods are elementwise over numpy arrays.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special

from src.efd import com_poisson
from src.errors import DomainError, UndefinedPoint
from src.numerics.special import inverse_digamma, polygamma, solve_increasing


class Support(str, Enum):
    REAL = "reals"
    POSITIVE = "positive reals"
    UNIT = "unit interval"
    COUNT = "counts"
    FRACTION = "fractions"


def _sigmoid(x):
    return special.expit(x)


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(np.ravel(mask))[0])


class Distribution(ABC):
    """Base class: the parameter functions a, b, c and T plus their derivatives."""

    name: str = "distribution"
    support: Support = Support.REAL
    # b depends on phi (b_phi(theta)); drives the extra dispersion-gradient terms
    dispersion_dependent: bool = False

    @property
    def fixed_dispersion(self) -> Optional[float]:
        """Dispersion value when it is not a free parameter."""
        return None

    # ------------------------------------------------------------------
    # Parameter functions
    # ------------------------------------------------------------------

    def stat(self, y):
        return np.asarray(y, dtype=float)

    def a(self, phi):
        return np.asarray(phi, dtype=float)

    def da(self, phi):
        return np.ones_like(np.asarray(phi, dtype=float))

    @abstractmethod
    def b(self, theta, phi): ...

    @abstractmethod
    def b1(self, theta, phi): ...

    @abstractmethod
    def b2(self, theta, phi): ...

    @abstractmethod
    def b3(self, theta, phi): ...

    @abstractmethod
    def c(self, y, phi): ...

    def dc_dphi(self, y, phi):
        return np.zeros(np.broadcast(np.asarray(y), np.asarray(phi)).shape)

    # Partials of b, b', b'' with respect to phi at fixed theta.
    def db_dphi(self, theta, phi):
        return np.zeros(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)

    def db1_dphi(self, theta, phi):
        return np.zeros(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)

    def db2_dphi(self, theta, phi):
        return np.zeros(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)

    # ------------------------------------------------------------------
    # Inverse of b'
    # ------------------------------------------------------------------

    @abstractmethod
    def mean_inverse(self, mu, phi):
        """theta such that b'(theta) = mu."""

    def dmean_inverse_dphi(self, mu, phi):
        """d theta / d phi along b'(theta, phi) = mu."""
        if not self.dispersion_dependent:
            return np.zeros(np.broadcast(np.asarray(mu), np.asarray(phi)).shape)
        theta = self.mean_inverse(mu, phi)
        return -self.db1_dphi(theta, phi) / self.b2(theta, phi)

    # ------------------------------------------------------------------
    # Support and output moments
    # ------------------------------------------------------------------

    @abstractmethod
    def valid_theta(self, theta) -> np.ndarray: ...

    def check_support(self, y) -> None:
        y = np.asarray(y, dtype=float)
        bad = ~self.in_support(y)
        if np.any(bad):
            i = _first_bad(bad)
            raise DomainError(
                f"row {i}: y={np.ravel(y)[i]!r} is outside the {self.support.value} support of {self.name}"
            )

    def in_support(self, y) -> np.ndarray:
        return np.isfinite(np.asarray(y, dtype=float))

    def output_mean(self, theta, phi):
        """E[y], which differs from b' when T is not the identity."""
        return self.b1(theta, phi)

    def output_variance(self, theta, phi):
        return self.b2(theta, phi) * self.a(phi)

    @abstractmethod
    def sample(self, theta, phi, rng: np.random.Generator): ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


# ----------------------------------------------------------------------
# Continuous outputs
# ----------------------------------------------------------------------


class Gaussian(Distribution):
    name = "gaussian"
    support = Support.REAL

    def b(self, theta, phi):
        return 0.5 * np.asarray(theta) ** 2

    def b1(self, theta, phi):
        return np.asarray(theta, dtype=float) + 0.0 * np.asarray(phi)

    def b2(self, theta, phi):
        return np.ones(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)

    def b3(self, theta, phi):
        return np.zeros(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        return -0.5 * np.log(2.0 * np.pi * phi) - y**2 / (2.0 * phi)

    def dc_dphi(self, y, phi):
        y = np.asarray(y, dtype=float)
        return -0.5 / phi + y**2 / (2.0 * phi**2)

    def mean_inverse(self, mu, phi):
        return np.asarray(mu, dtype=float) + 0.0 * np.asarray(phi)

    def valid_theta(self, theta):
        return np.isfinite(theta)

    def sample(self, theta, phi, rng):
        return rng.normal(theta, np.sqrt(phi))


class GammaShape(Distribution):
    """Gamma with shape 1/phi and mean -1/theta."""

    name = "gamma_shape"
    support = Support.POSITIVE

    def b(self, theta, phi):
        return -np.log(-np.asarray(theta, dtype=float)) + 0.0 * np.asarray(phi)

    def b1(self, theta, phi):
        return -1.0 / np.asarray(theta, dtype=float) + 0.0 * np.asarray(phi)

    def b2(self, theta, phi):
        return 1.0 / np.asarray(theta, dtype=float) ** 2 + 0.0 * np.asarray(phi)

    def b3(self, theta, phi):
        return -2.0 / np.asarray(theta, dtype=float) ** 3 + 0.0 * np.asarray(phi)

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        k = 1.0 / np.asarray(phi, dtype=float)
        return (k - 1.0) * np.log(y) + k * np.log(k) - special.gammaln(k)

    def dc_dphi(self, y, phi):
        y = np.asarray(y, dtype=float)
        phi = np.asarray(phi, dtype=float)
        k = 1.0 / phi
        return -(np.log(y) + np.log(k) + 1.0 - special.digamma(k)) / phi**2

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~(mu > 0)):
            raise UndefinedPoint("gamma_shape mean must be positive")
        return -1.0 / mu + 0.0 * np.asarray(phi)

    def valid_theta(self, theta):
        return np.asarray(theta) < 0

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0)

    def sample(self, theta, phi, rng):
        k = 1.0 / np.asarray(phi, dtype=float)
        return rng.gamma(k, 1.0 / (-np.asarray(theta) * k))


class GammaScale(Distribution):
    """Gamma with scale phi and shape theta/phi; T(y) = log y."""

    name = "gamma_scale"
    support = Support.POSITIVE
    dispersion_dependent = True

    def stat(self, y):
        return np.log(np.asarray(y, dtype=float))

    def b(self, theta, phi):
        x = np.asarray(theta) / phi
        return theta * np.log(phi) + phi * special.gammaln(x)

    def b1(self, theta, phi):
        return np.log(phi) + polygamma(0, np.asarray(theta) / phi)

    def b2(self, theta, phi):
        return polygamma(1, np.asarray(theta) / phi) / phi

    def b3(self, theta, phi):
        return polygamma(2, np.asarray(theta) / phi) / np.asarray(phi) ** 2

    def db_dphi(self, theta, phi):
        x = np.asarray(theta) / phi
        return x + special.gammaln(x) - x * special.digamma(x)

    def db1_dphi(self, theta, phi):
        x = np.asarray(theta) / phi
        return 1.0 / phi - x / phi * special.polygamma(1, x)

    def db2_dphi(self, theta, phi):
        phi = np.asarray(phi, dtype=float)
        x = np.asarray(theta) / phi
        return -special.polygamma(1, x) / phi**2 - x * special.polygamma(2, x) / phi**2

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        return -y / phi - np.log(y)

    def dc_dphi(self, y, phi):
        return np.asarray(y, dtype=float) / np.asarray(phi, dtype=float) ** 2

    def mean_inverse(self, mu, phi):
        x = inverse_digamma(np.asarray(mu, dtype=float) - np.log(phi))
        return phi * x

    def dmean_inverse_dphi(self, mu, phi):
        x = inverse_digamma(np.asarray(mu, dtype=float) - np.log(phi))
        return x - 1.0 / special.polygamma(1, x)

    def valid_theta(self, theta):
        return np.asarray(theta) > 0

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0)

    def output_mean(self, theta, phi):
        return np.asarray(theta, dtype=float) + 0.0 * np.asarray(phi)

    def output_variance(self, theta, phi):
        return np.asarray(theta, dtype=float) * phi

    def sample(self, theta, phi, rng):
        return rng.gamma(np.asarray(theta) / phi, phi)


class InverseGaussian(Distribution):
    name = "inv_gaussian"
    support = Support.POSITIVE

    def b(self, theta, phi):
        return -np.sqrt(-2.0 * np.asarray(theta, dtype=float)) + 0.0 * np.asarray(phi)

    def b1(self, theta, phi):
        return (-2.0 * np.asarray(theta, dtype=float)) ** -0.5 + 0.0 * np.asarray(phi)

    def b2(self, theta, phi):
        return (-2.0 * np.asarray(theta, dtype=float)) ** -1.5 + 0.0 * np.asarray(phi)

    def b3(self, theta, phi):
        return 3.0 * (-2.0 * np.asarray(theta, dtype=float)) ** -2.5 + 0.0 * np.asarray(phi)

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        return -0.5 * np.log(2.0 * np.pi * y**3 * phi) - 1.0 / (2.0 * y * phi)

    def dc_dphi(self, y, phi):
        y = np.asarray(y, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return -0.5 / phi + 1.0 / (2.0 * y * phi**2)

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~(mu > 0)):
            raise UndefinedPoint("inv_gaussian mean must be positive")
        return -1.0 / (2.0 * mu**2) + 0.0 * np.asarray(phi)

    def valid_theta(self, theta):
        return np.asarray(theta) < 0

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0)

    def sample(self, theta, phi, rng):
        return rng.wald(self.b1(theta, phi), 1.0 / np.asarray(phi, dtype=float))


class Beta(Distribution):
    """Beta with mean theta and precision 1/phi; T(y) = logit y."""

    name = "beta"
    support = Support.UNIT
    dispersion_dependent = True

    def stat(self, y):
        return special.logit(np.asarray(y, dtype=float))

    def _shapes(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        return theta / phi, (1.0 - theta) / phi

    def b(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return phi * (special.gammaln(x1) + special.gammaln(x2))

    def b1(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return special.digamma(x1) - special.digamma(x2)

    def b2(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return (special.polygamma(1, x1) + special.polygamma(1, x2)) / phi

    def b3(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return (special.polygamma(2, x1) - special.polygamma(2, x2)) / np.asarray(phi) ** 2

    def db_dphi(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return (
            special.gammaln(x1)
            + special.gammaln(x2)
            - x1 * special.digamma(x1)
            - x2 * special.digamma(x2)
        )

    def db1_dphi(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        return -(x1 * special.polygamma(1, x1) - x2 * special.polygamma(1, x2)) / phi

    def db2_dphi(self, theta, phi):
        x1, x2 = self._shapes(theta, phi)
        t1 = special.polygamma(1, x1) + special.polygamma(1, x2)
        t2 = x1 * special.polygamma(2, x1) + x2 * special.polygamma(2, x2)
        return -(t1 + t2) / np.asarray(phi) ** 2

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        k = 1.0 / np.asarray(phi, dtype=float)
        return special.gammaln(k) + (k - 1.0) * np.log1p(-y) - np.log(y)

    def dc_dphi(self, y, phi):
        y = np.asarray(y, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return -(special.digamma(1.0 / phi) + np.log1p(-y)) / phi**2

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        phi_b = np.broadcast_to(np.asarray(phi, dtype=float), mu.shape)
        if np.any(~np.isfinite(mu)):
            raise UndefinedPoint("beta sufficient statistic is not finite (y on the boundary)")

        # Solved in z = logit(theta); theta and 1 - theta are both formed
        # from z, so either tail keeps its relative precision.
        def score(z):
            p, q = _sigmoid(z), _sigmoid(-z)
            x1, x2 = p / phi_b, q / phi_b
            value = special.digamma(x1) - special.digamma(x2) - mu
            with np.errstate(over="ignore", invalid="ignore"):
                slope = (special.polygamma(1, x1) + special.polygamma(1, x2)) / phi_b * p * q
            return value, slope

        # psi(x) ~ -1/x near zero: theta ~ phi / -mu deep in the lower tail
        lower = np.minimum(0.5, phi_b / np.maximum(-mu, 1e-300))
        upper = np.maximum(0.5, 1.0 - phi_b / np.maximum(mu, 1e-300))
        seed = special.logit(np.where(mu < 0, lower, upper))
        z = solve_increasing(score, np.clip(seed, -700.0, 700.0), -700.0, 700.0)
        return _sigmoid(z)

    def valid_theta(self, theta):
        theta = np.asarray(theta)
        return (theta > 0) & (theta < 1)

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0) & (y < 1)

    def output_mean(self, theta, phi):
        return np.asarray(theta, dtype=float) + 0.0 * np.asarray(phi)

    def output_variance(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        return theta * (1.0 - theta) * phi / (1.0 + phi)

    def sample(self, theta, phi, rng):
        x1, x2 = self._shapes(theta, phi)
        return rng.beta(x1, x2)


# ----------------------------------------------------------------------
# Count and fraction outputs
# ----------------------------------------------------------------------


def _is_count(y: np.ndarray) -> np.ndarray:
    return np.isfinite(y) & (y >= 0) & (np.floor(y) == y)


class Poisson(Distribution):
    name = "poisson"
    support = Support.COUNT

    @property
    def fixed_dispersion(self) -> Optional[float]:
        return 1.0

    def a(self, phi):
        return np.ones_like(np.asarray(phi, dtype=float))

    def da(self, phi):
        return np.zeros_like(np.asarray(phi, dtype=float))

    def b(self, theta, phi):
        return np.exp(theta) + 0.0 * np.asarray(phi)

    b1 = b
    b2 = b
    b3 = b

    def c(self, y, phi):
        return -special.gammaln(np.asarray(y, dtype=float) + 1.0) + 0.0 * np.asarray(phi)

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~(mu > 0)):
            raise UndefinedPoint("poisson expansion point needs y + offset > 0; set a positive offset")
        return np.log(mu) + 0.0 * np.asarray(phi)

    def valid_theta(self, theta):
        return np.isfinite(theta)

    def in_support(self, y):
        return _is_count(np.asarray(y, dtype=float))

    def sample(self, theta, phi, rng):
        return rng.poisson(np.exp(theta)).astype(float)


class NegativeBinomial(Distribution):
    """Negative binomial with r = 1/phi successes and q = exp(theta/phi)."""

    name = "neg_binomial"
    support = Support.COUNT
    dispersion_dependent = True

    @staticmethod
    def _q(theta, phi):
        return np.exp(np.asarray(theta, dtype=float) / phi)

    def b(self, theta, phi):
        return -np.log(-np.expm1(np.asarray(theta, dtype=float) / phi))

    def b1(self, theta, phi):
        q = self._q(theta, phi)
        return q / (1.0 - q) / phi

    def b2(self, theta, phi):
        q = self._q(theta, phi)
        return q / (1.0 - q) ** 2 / np.asarray(phi) ** 2

    def b3(self, theta, phi):
        q = self._q(theta, phi)
        return q * (1.0 + q) / (1.0 - q) ** 3 / np.asarray(phi) ** 3

    def db_dphi(self, theta, phi):
        q = self._q(theta, phi)
        return -(np.asarray(theta) / np.asarray(phi) ** 2) * q / (1.0 - q)

    def db1_dphi(self, theta, phi):
        phi = np.asarray(phi, dtype=float)
        q = self._q(theta, phi)
        h = q / (1.0 - q)
        h1 = q / (1.0 - q) ** 2
        return -h / phi**2 - np.asarray(theta) * h1 / phi**3

    def db2_dphi(self, theta, phi):
        phi = np.asarray(phi, dtype=float)
        q = self._q(theta, phi)
        h1 = q / (1.0 - q) ** 2
        h2 = q * (1.0 + q) / (1.0 - q) ** 3
        return -2.0 * h1 / phi**3 - np.asarray(theta) * h2 / phi**4

    def c(self, y, phi):
        y = np.asarray(y, dtype=float)
        r = 1.0 / np.asarray(phi, dtype=float)
        return special.gammaln(y + r) - special.gammaln(y + 1.0) - special.gammaln(r)

    def dc_dphi(self, y, phi):
        y = np.asarray(y, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r = 1.0 / phi
        return -(special.digamma(y + r) - special.digamma(r)) / phi**2

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~(mu > 0)):
            raise UndefinedPoint("neg_binomial expansion point needs y + offset > 0; set a positive offset")
        m = mu * phi
        return phi * (np.log(m) - np.log1p(m))

    def dmean_inverse_dphi(self, mu, phi):
        m = np.asarray(mu, dtype=float) * phi
        return np.log(m) - np.log1p(m) + 1.0 / (1.0 + m)

    def valid_theta(self, theta):
        return np.asarray(theta) < 0

    def in_support(self, y):
        return _is_count(np.asarray(y, dtype=float))

    def sample(self, theta, phi, rng):
        q = self._q(theta, phi)
        return rng.negative_binomial(1.0 / np.asarray(phi, dtype=float), 1.0 - q).astype(float)


class ComPoisson(Distribution):
    """
    Conway-Maxwell-Poisson with rate exp(theta) and dispersion nu = phi.

    a(phi) = 1/phi, b = log S(exp(theta), phi) / phi, c = -phi log y!.
    b' and b'' are the exact series moments of y.
    """

    name = "com_poisson"
    support = Support.COUNT
    dispersion_dependent = True

    def a(self, phi):
        return 1.0 / np.asarray(phi, dtype=float)

    def da(self, phi):
        return -1.0 / np.asarray(phi, dtype=float) ** 2

    def b(self, theta, phi):
        return com_poisson.moments(theta, phi).log_s / phi

    def b1(self, theta, phi):
        return com_poisson.moments(theta, phi).mean

    def b2(self, theta, phi):
        return phi * com_poisson.moments(theta, phi).var

    def b3(self, theta, phi):
        return np.asarray(phi) ** 2 * com_poisson.moments(theta, phi).third

    def db_dphi(self, theta, phi):
        mom = com_poisson.moments(theta, phi)
        return -mom.log_s / np.asarray(phi) ** 2 + mom.mean_s / phi

    def db1_dphi(self, theta, phi):
        return com_poisson.moments(theta, phi).cov_ns

    def db2_dphi(self, theta, phi):
        mom = com_poisson.moments(theta, phi)
        return mom.var + phi * mom.comoment

    def c(self, y, phi):
        return -np.asarray(phi) * special.gammaln(np.asarray(y, dtype=float) + 1.0)

    def dc_dphi(self, y, phi):
        return -special.gammaln(np.asarray(y, dtype=float) + 1.0) + 0.0 * np.asarray(phi)

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~(mu > 0)):
            raise UndefinedPoint("com_poisson expansion point needs y + offset > 0; set a positive offset")
        phi_b = np.broadcast_to(np.asarray(phi, dtype=float), mu.shape)
        seed = np.log(np.maximum(mu + 0.5 - 0.5 / phi_b, 1e-3))

        def score(theta):
            mom = com_poisson.moments(theta, phi_b)
            return mom.mean - mu, phi_b * mom.var

        return solve_increasing(score, seed, -50.0, 12.0, tol=1e-12)

    def approximate_mean(self, theta, phi):
        return com_poisson.approximate_mean(theta, phi)

    def valid_theta(self, theta):
        return np.isfinite(theta) & (np.asarray(theta) < 12.0)

    def in_support(self, y):
        return _is_count(np.asarray(y, dtype=float))

    def output_variance(self, theta, phi):
        return com_poisson.moments(theta, phi).var

    def sample(self, theta, phi, rng):
        return com_poisson.sample(theta, phi, rng)


class Binomial(Distribution):
    """Proportion of successes out of `trials`; phi = 1/trials is fixed."""

    name = "binomial"
    support = Support.FRACTION

    def __init__(self, trials: int = 1):
        if trials < 1:
            raise DomainError(f"binomial trial count must be >= 1, got {trials}")
        self.trials = int(trials)

    @property
    def fixed_dispersion(self) -> Optional[float]:
        return 1.0 / self.trials

    def a(self, phi):
        return np.full_like(np.asarray(phi, dtype=float), 1.0 / self.trials)

    def da(self, phi):
        return np.zeros_like(np.asarray(phi, dtype=float))

    def b(self, theta, phi):
        return np.logaddexp(0.0, theta) + 0.0 * np.asarray(phi)

    def b1(self, theta, phi):
        return _sigmoid(theta) + 0.0 * np.asarray(phi)

    def b2(self, theta, phi):
        s = _sigmoid(theta)
        return s * (1.0 - s) + 0.0 * np.asarray(phi)

    def b3(self, theta, phi):
        s = _sigmoid(theta)
        return s * (1.0 - s) * (1.0 - 2.0 * s) + 0.0 * np.asarray(phi)

    def c(self, y, phi):
        n = float(self.trials)
        k = np.asarray(y, dtype=float) * n
        return (
            special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)
        ) + 0.0 * np.asarray(phi)

    def mean_inverse(self, mu, phi):
        mu = np.asarray(mu, dtype=float)
        if np.any(~((mu >= 0) & (mu <= 1))):
            raise UndefinedPoint("binomial mean must lie in [0, 1]")
        # Means that round to 0 or 1 map to -inf / +inf.
        with np.errstate(divide="ignore"):
            return special.logit(mu) + 0.0 * np.asarray(phi)

    def valid_theta(self, theta):
        return np.isfinite(theta)

    def in_support(self, y):
        k = np.asarray(y, dtype=float) * self.trials
        k = np.where(np.abs(k - np.round(k)) < 1e-9, np.round(k), k)
        return _is_count(k) & (k <= self.trials)

    def sample(self, theta, phi, rng):
        return rng.binomial(self.trials, _sigmoid(theta)) / float(self.trials)

    def __repr__(self) -> str:
        return f"Binomial(trials={self.trials})"


