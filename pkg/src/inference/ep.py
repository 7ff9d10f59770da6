"""
Expectation propagation with sequential, damped site updates.

Sites are kept in natural form (tau, nu). For each observation the
cavity N(nu_c/tau_c, 1/tau_c) is formed from the current posterior,
the tilted distribution p(y_i | eta) N(eta | cavity) is moment-matched
by quadrature, and the site is moved towards the matching parameters.
Updates that would make a site precision negative are skipped and
counted. The first sweep from vacuous sites is undamped.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.efd.distributions import Gaussian
from src.efd.family import LikelihoodFamily
from src.efd.links import Canonical
from src.errors import NonFinite
from src.inference.posterior import (
    Diagnostics,
    GaussianPosterior,
    InferenceOptions,
    InferenceResult,
    SiteSet,
)
from src.kernels import KernelSpec
from src.numerics.linalg import site_form
from src.numerics.quadrature import GaussianExpectationPlan, tilted_expect

logger = logging.getLogger(__name__)


class TiltedMoments(NamedTuple):
    log_z: np.ndarray
    mean: np.ndarray
    var: np.ndarray


def _is_conjugate_gaussian(lik: LikelihoodFamily) -> bool:
    return isinstance(lik.dist, Gaussian) and isinstance(lik.link, Canonical)


def _tilted_mode(lik: LikelihoodFamily, y, m, v, max_iter: int = 50) -> Tuple[np.ndarray, np.ndarray]:
    """Mode and curvature-based spread of the tilted density, for recentring quadrature."""

    eta = m.copy()
    h = -1.0 / v
    for _ in range(max_iter):
        with np.errstate(all="ignore"):
            d = lik.derivatives(y, eta)
            g = d.d1 - (eta - m) / v
            h = d.d2 - 1.0 / v
        h = np.where(np.isfinite(h) & (h < 0), h, -1.0 / v)
        step = np.where(np.isfinite(g), -g / h, -(eta - m) * 0.5)
        step = np.clip(step, -3.0 * np.sqrt(v), 3.0 * np.sqrt(v))
        eta = eta + step
        if np.all(np.abs(step) < 1e-10 * (1.0 + np.abs(eta))):
            break
    return eta, -1.0 / h


def _tilted(
    lik: LikelihoodFamily,
    y,
    m,
    v,
    plan: GaussianExpectationPlan,
    with_dispersion: bool = False,
) -> Tuple[TiltedMoments, Optional[np.ndarray]]:
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)

    if _is_conjugate_gaussian(lik):
        phi = lik.phi
        s = v + phi
        log_z = -0.5 * np.log(2.0 * np.pi * s) - 0.5 * (y - m) ** 2 / s
        mean = m + v * (y - m) / s
        var = v - v**2 / s
        extra = None
        if with_dispersion:
            extra = -0.5 / phi + ((y - mean) ** 2 + var) / (2.0 * phi**2)
        return TiltedMoments(log_z, mean, var), extra

    center, spread = _tilted_mode(lik, y, m, v)

    def loglik(eta):
        return lik.log_likelihood(y[..., None], eta, strict=False)

    extras = ()
    if with_dispersion:
        extras = (lambda eta: lik.dispersion_partials(y[..., None], eta).value,)
    log_z, mean, var, extra_vals = tilted_expect(loglik, m, v, plan, center=center, spread=spread, extras=extras)
    if np.any(~(var > 0)):
        raise NonFinite(f"{lik.id}: tilted variance is not positive")
    return TiltedMoments(log_z, mean, var), (extra_vals[0] if with_dispersion else None)


def tilted_moments(
    lik: LikelihoodFamily,
    y,
    cavity_mean,
    cavity_var,
    plan: GaussianExpectationPlan = GaussianExpectationPlan().adaptive(),
) -> TiltedMoments:
    """log Z, mean and variance of p(y | theta(eta)) N(eta | cavity_mean, cavity_var)."""

    return _tilted(lik, y, cavity_mean, cavity_var, plan)[0]


def _cavities(post_cov: np.ndarray, post_mean: np.ndarray, sites: SiteSet):
    s = np.diag(post_cov)
    return 1.0 / s - sites.tau, post_mean / s - sites.nu


def ep_infer(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
    sites: Optional[SiteSet] = None,
) -> InferenceResult:
    y = np.asarray(y, dtype=float)
    lik.check_support(y)
    n = y.size
    k = kernel.gram(x)
    plan = options.plan.adaptive() if options.ep_adaptive else options.plan

    fresh = sites is None
    sites = SiteSet.vacuous(n) if fresh else sites.copy()
    post = GaussianPosterior.from_sites(k, sites.tau, sites.nu)
    sigma = post.cov.copy()
    mu = post.mean.copy()

    skipped = 0
    converged = False
    sweep = 0
    for sweep in range(1, options.ep_max_sweeps + 1):
        old_tau = sites.tau.copy()
        old_nu = sites.nu.copy()
        delta = 1.0 if (fresh and sweep == 1) else options.ep_damping
        for i in range(n):
            s_ii = sigma[i, i]
            tau_c = 1.0 / s_ii - sites.tau[i]
            nu_c = mu[i] / s_ii - sites.nu[i]
            if not tau_c > 0:
                skipped += 1
                continue
            mom, _ = _tilted(lik, y[i : i + 1], np.array([nu_c / tau_c]), np.array([1.0 / tau_c]), plan)
            tau_new = 1.0 / mom.var[0] - tau_c
            nu_new = mom.mean[0] / mom.var[0] - nu_c
            if not (np.isfinite(tau_new) and np.isfinite(nu_new)) or tau_new < 0:
                skipped += 1
                continue
            tau_new = (1.0 - delta) * sites.tau[i] + delta * tau_new
            nu_new = (1.0 - delta) * sites.nu[i] + delta * nu_new
            dtau = tau_new - sites.tau[i]
            sites.tau[i] = tau_new
            sites.nu[i] = nu_new
            sites.log_z[i] = mom.log_z[0]
            si = sigma[:, i].copy()
            sigma -= (dtau / (1.0 + dtau * s_ii)) * np.outer(si, si)
            mu = sigma @ sites.nu

        post = GaussianPosterior.from_sites(k, sites.tau, sites.nu)
        sigma = post.cov.copy()
        mu = post.mean.copy()
        change = max(np.max(np.abs(sites.tau - old_tau)), np.max(np.abs(sites.nu - old_nu)))
        if change < options.ep_tol:
            converged = True
            break

    if skipped:
        logger.warning("%s: EP skipped %d site updates with negative precision", lik.id, skipped)
    if not converged:
        logger.warning("%s: EP did not converge in %d sweeps", lik.id, options.ep_max_sweeps)

    tau_c, nu_c = _cavities(post.cov, post.mean, sites)
    if np.any(~(tau_c > 0)):
        raise NonFinite(f"{lik.id}: EP cavity precision is not positive at the final posterior")
    want_disp = options.compute_grad and lik.has_dispersion
    mom, dphi = _tilted(lik, y, nu_c / tau_c, 1.0 / tau_c, plan, with_dispersion=want_disp)

    tau, nu = sites.tau, sites.nu
    form = site_form(k, tau)
    log_marginal = float(
        np.sum(mom.log_z)
        + 0.5 * np.sum(np.log1p(tau / tau_c))
        - 0.5 * form.logdet
        + 0.5 * nu @ post.cov @ nu
        + np.sum((nu_c**2 * tau / tau_c - 2.0 * nu_c * nu - nu**2) / (2.0 * (tau_c + tau)))
    )

    grad = None
    if options.compute_grad:
        b = post.alpha
        kernel_grad = [0.5 * b @ g @ b - 0.5 * np.sum(form.gain * g) for g in kernel.gram_gradients(x)]
        disp = lik.phi * float(np.sum(dphi)) if want_disp else 0.0
        grad = np.append(np.asarray(kernel_grad, dtype=float), disp)

    diagnostics = Diagnostics(method="ep", iterations=sweep, converged=converged, skipped=skipped)
    logger.debug("engine=ep iterations=%d converged=%s skipped=%d log_marginal=%.6g", sweep, converged, skipped, log_marginal)
    return InferenceResult(post, log_marginal, grad, diagnostics, sites=sites)
