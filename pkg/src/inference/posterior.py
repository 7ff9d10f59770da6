"""Value types shared by the inference engines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from src.numerics.linalg import site_form
from src.numerics.quadrature import GaussianExpectationPlan


@dataclass(frozen=True)
class InferenceOptions:
    """Numerical settings passed by value through every engine."""

    plan: GaussianExpectationPlan = GaussianExpectationPlan()
    newton_tol: float = 1e-8
    newton_max_iter: int = 100
    ep_tol: float = 1e-6
    ep_max_sweeps: int = 100
    ep_damping: float = 0.9
    ep_adaptive: bool = True
    kld_gtol: float = 1e-7
    kld_max_iter: int = 2000
    compute_grad: bool = True


@dataclass(frozen=True)
class GaussianPosterior:
    """
    N(mean, cov) over the training latents.

    Prediction uses `alpha` = K^-1 mean and `gain` = (K + diag(precision)^-1)^-1.
    When the posterior has the common form cov = (K^-1 + W^-1)^-1,
    mean = cov W^-1 t, the site variances `w` and targets `t` are kept.
    """

    mean: np.ndarray
    cov: np.ndarray
    precision: np.ndarray
    alpha: np.ndarray
    gain: np.ndarray
    w: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None

    @classmethod
    def from_sites(cls, k: np.ndarray, precision: np.ndarray, nu: np.ndarray) -> "GaussianPosterior":
        """Posterior with site precisions and natural means nu = precision * t."""

        precision = np.asarray(precision, dtype=float)
        nu = np.asarray(nu, dtype=float)
        form = site_form(k, precision)
        alpha = nu - form.gain @ (k @ nu)
        mean = k @ alpha
        w = t = None
        if np.all(precision > 0):
            w = 1.0 / precision
            t = nu / precision
        return cls(mean, form.cov, precision, alpha, form.gain, w, t)

    @classmethod
    def from_common_form(cls, k: np.ndarray, w: np.ndarray, t: np.ndarray) -> "GaussianPosterior":
        w = np.asarray(w, dtype=float)
        return cls.from_sites(k, 1.0 / w, np.asarray(t, dtype=float) / w)

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov).copy()


@dataclass
class SiteSet:
    """
    EP site parameters in natural form: precision tau and natural mean nu.

    tau = 0 is the uninitialised site (infinite variance).
    """

    tau: np.ndarray
    nu: np.ndarray
    log_z: np.ndarray

    @classmethod
    def vacuous(cls, n: int) -> "SiteSet":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    @property
    def mean(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.tau > 0, self.nu / self.tau, 0.0)

    @property
    def var(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.tau > 0, 1.0 / self.tau, np.inf)

    def copy(self) -> "SiteSet":
        return SiteSet(self.tau.copy(), self.nu.copy(), self.log_z.copy())


@dataclass(frozen=True)
class VariationalParams:
    """m = K gamma, V = K (I + diag(lam) K)^-1."""

    gamma: np.ndarray
    lam: np.ndarray


@dataclass
class Diagnostics:
    method: str
    iterations: int = 0
    converged: bool = True
    skipped: int = 0
    damped: int = 0
    clamped: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        out = {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "skipped": self.skipped,
            "damped": self.damped,
            "clamped": self.clamped,
        }
        out.update(self.extra)
        return out


@dataclass
class InferenceResult:
    """
    Posterior, approximate log marginal and its gradient.

    grad is ordered as the kernel's log-hyperparameters followed by log phi
    (zero when the likelihood fixes its dispersion).
    """

    posterior: GaussianPosterior
    log_marginal: float
    grad: Optional[np.ndarray]
    diagnostics: Diagnostics
    sites: Optional[SiteSet] = None
    variational: Optional[VariationalParams] = None
    expansion: Optional[np.ndarray] = None
