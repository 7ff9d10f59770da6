"""
KL-divergence (variational) inference.

The Gaussian posterior is parameterised as m = K gamma and
V = (K^-1 + diag(lam))^-1 with lam = exp(rho) > 0. The bound is

    L = sum_i f_i(m_i, v_i) - gamma'K gamma / 2 + sum_i lam_i v_i / 2 - log|I + diag(lam) K| / 2

with f_i(m, v) = E_N(eta | m, v)[log p(y_i | eta)].
"""

from __future__ import annotations

import logging
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import special

from src.efd.distributions import Gaussian, Poisson
from src.efd.family import LikelihoodFamily
from src.efd.links import Canonical
from src.errors import GgpmError, OptimizerFailure
from src.inference.posterior import (
    Diagnostics,
    GaussianPosterior,
    InferenceOptions,
    InferenceResult,
    VariationalParams,
)
from src.inference.taylor import transformed_targets
from src.kernels import KernelSpec
from src.numerics.linalg import site_form
from src.numerics.optimize import MinimizeOptions, OptimizeTrace, minimize
from src.numerics.quadrature import GaussianExpectationPlan, gaussian_expect

logger = logging.getLogger(__name__)

CLAMP_FLOOR = 1e-10


class ExpectedLogLik(NamedTuple):
    f: np.ndarray
    df_dm: np.ndarray
    df_dv: np.ndarray
    df_dphi: np.ndarray


def _closed_form(lik: LikelihoodFamily, y, m, v) -> Optional[ExpectedLogLik]:
    if not isinstance(lik.link, Canonical):
        return None
    if isinstance(lik.dist, Gaussian):
        phi = lik.phi
        sq = (y - m) ** 2 + v
        return ExpectedLogLik(
            -0.5 * np.log(2.0 * np.pi * phi) - sq / (2.0 * phi),
            (y - m) / phi,
            np.full_like(m, -0.5 / phi),
            -0.5 / phi + sq / (2.0 * phi**2),
        )
    if isinstance(lik.dist, Poisson):
        rate = np.exp(m + 0.5 * v)
        return ExpectedLogLik(
            y * m - rate - special.gammaln(y + 1.0), y - rate, -0.5 * rate, np.zeros_like(m)
        )
    return None


def expected_log_lik(
    lik: LikelihoodFamily,
    y,
    m,
    v,
    plan: GaussianExpectationPlan = GaussianExpectationPlan(),
    form: str = "u",
    closed_form: bool = True,
) -> ExpectedLogLik:
    """
    f = E[log p(y | eta)] under eta ~ N(m, v) and its partials.

    form="u" uses df/dm = E[u], df/dv = E[(eta - m) u] / (2v);
    form="score" uses df/dm = E[(eta - m) l] / v and
    df/dv = E[((eta - m)^2 / v^2 - 1/v) l] / 2.
    """

    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if closed_form:
        exact = _closed_form(lik, y, m, v)
        if exact is not None:
            return exact

    want_phi = lik.has_dispersion

    def stacked(eta):
        d = lik.derivatives(y[..., None], eta)
        z = (eta - m[..., None]) / v[..., None]
        if form == "u":
            dm, dv = d.d1, 0.5 * z * d.d1
        else:
            dm, dv = z * d.value, 0.5 * (z**2 - 1.0 / v[..., None]) * d.value
        dphi = lik.dispersion_partials(y[..., None], eta).value if want_phi else np.zeros_like(eta)
        return np.stack([d.value, dm, dv, dphi])

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = gaussian_expect(stacked, m, v, plan)
    return ExpectedLogLik(out[0], out[1], out[2], out[3])


def derivative_crosscheck(lik: LikelihoodFamily, y, m, v, plan: GaussianExpectationPlan) -> float:
    """Largest gap between the u-form and score-form partials of f."""

    u = expected_log_lik(lik, y, m, v, plan, form="u", closed_form=False)
    s = expected_log_lik(lik, y, m, v, plan, form="score", closed_form=False)
    gap = max(np.max(np.abs(u.df_dm - s.df_dm)), np.max(np.abs(u.df_dv - s.df_dv)))
    return float(gap)


class KldBound(NamedTuple):
    value: float
    d_gamma: np.ndarray
    d_rho: np.ndarray
    hyper_grad: Optional[np.ndarray]
    mean: np.ndarray
    cov: np.ndarray
    gain: np.ndarray


def kld_bound(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    gamma: np.ndarray,
    lam: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
    hyper_grad: bool = False,
    k: Optional[np.ndarray] = None,
) -> KldBound:
    """The bound and its gradients in (gamma, rho = log lam) and, optionally, the hyperparameters."""

    k = kernel.gram(x) if k is None else k
    sf = site_form(k, lam)
    cov = sf.cov
    v = np.diag(cov).copy()
    m = k @ gamma
    e = expected_log_lik(lik, y, m, v, options.plan)
    value = float(np.sum(e.f) - 0.5 * gamma @ m + 0.5 * lam @ v - 0.5 * sf.logdet)

    c = e.df_dv + 0.5 * lam
    d_gamma = k @ (e.df_dm - gamma)
    d_rho = -((cov * cov) @ c) * lam

    grads = None
    if hyper_grad:
        a = np.eye(y.size) - cov * lam[None, :]
        cross = np.outer(e.df_dm, gamma)
        la = lam[:, None] * a
        mmat = 0.5 * (cross + cross.T) - 0.5 * np.outer(gamma, gamma) + a.T @ (c[:, None] * a) - 0.25 * (la + la.T)
        kernel_grad = [float(np.sum(mmat * g)) for g in kernel.gram_gradients(x)]
        disp = lik.phi * float(np.sum(e.df_dphi)) if lik.has_dispersion else 0.0
        grads = np.append(np.asarray(kernel_grad, dtype=float), disp)
    return KldBound(value, d_gamma, d_rho, grads, m, cov, sf.gain)


def initial_params(lik: LikelihoodFamily, y: np.ndarray) -> VariationalParams:
    """gamma = 0 and lam = 1/w~ from the Taylor curvature where it is usable."""

    n = y.size
    lam = np.ones(n)
    try:
        w = transformed_targets(lik, y).w
        lam = np.where(np.isfinite(w) & (w > 0), 1.0 / w, 1.0)
    except GgpmError:
        pass
    return VariationalParams(np.zeros(n), lam)


def conjugate_optimum(lik: LikelihoodFamily, y: np.ndarray, k: np.ndarray) -> Optional[VariationalParams]:
    """The bound's maximiser in closed form: exact for the canonical Gaussian, where lam = 1/phi."""

    if not (isinstance(lik.dist, Gaussian) and isinstance(lik.link, Canonical)):
        return None
    n = y.size
    gamma = np.linalg.solve(k + lik.phi * np.eye(n), y)
    return VariationalParams(gamma, np.full(n, 1.0 / lik.phi))


def _posterior(bound: KldBound, gamma: np.ndarray, lam: np.ndarray) -> GaussianPosterior:
    t = gamma / lam + bound.mean
    return GaussianPosterior(bound.mean, bound.cov, lam, gamma, bound.gain, 1.0 / lam, t)


def kld_infer(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
    init: Optional[VariationalParams] = None,
) -> InferenceResult:
    y = np.asarray(y, dtype=float)
    lik.check_support(y)
    n = y.size
    k = kernel.gram(x)
    init = init or initial_params(lik, y)

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        b = kld_bound(lik, kernel, x, y, z[:n], np.exp(z[n:]), options, k=k)
        return -b.value, -np.concatenate([b.d_gamma, b.d_rho])

    exact = conjugate_optimum(lik, y, k)
    if exact is not None:
        z, trace = np.concatenate([exact.gamma, np.log(exact.lam)]), OptimizeTrace(converged=True, status="converged")
    else:
        z0 = np.concatenate([init.gamma, np.log(np.maximum(init.lam, CLAMP_FLOOR))])
        z, trace = minimize(objective, z0, MinimizeOptions(gtol=options.kld_gtol, max_iter=options.kld_max_iter))
    gamma, lam = z[:n], np.exp(z[n:])
    bound = kld_bound(lik, kernel, x, y, gamma, lam, options, hyper_grad=options.compute_grad, k=k)
    if not trace.converged and trace.grad_norm > 1e-4:
        raise OptimizerFailure(f"{lik.id}: variational bound optimisation stalled ({trace.message})", best=bound.value)

    clamped = int(np.sum(lam < CLAMP_FLOOR))
    if clamped:
        logger.warning("%s: %d variational precisions fell below %.0e", lik.id, clamped, CLAMP_FLOOR)
    diagnostics = Diagnostics(
        method="kld", iterations=trace.iterations, converged=trace.converged, clamped=clamped
    )
    if _closed_form(lik, y, bound.mean, np.diag(bound.cov)) is None:
        diagnostics.extra["derivative_crosscheck"] = derivative_crosscheck(lik, y, bound.mean, np.diag(bound.cov), options.plan)
    logger.debug("engine=kld iterations=%d converged=%s log_marginal=%.6g", trace.iterations, trace.converged, bound.value)
    return InferenceResult(
        _posterior(bound, gamma, lam),
        bound.value,
        bound.hyper_grad,
        diagnostics,
        variational=VariationalParams(gamma, lam),
    )


def joint_objective(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """
    Negative bound over [log hyperparameters, log phi, gamma, rho] jointly.

    Used when the variational engine drives hyperparameter fitting.
    """

    n = np.asarray(y).size
    p = kernel.n_params

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        kern = kernel.with_log_hyperparams(z[:p])
        lk = lik.with_dispersion(float(np.exp(z[p])))
        gamma = z[p + 1 : p + 1 + n]
        lam = np.exp(z[p + 1 + n :])
        b = kld_bound(lk, kern, x, y, gamma, lam, options, hyper_grad=True)
        return -b.value, -np.concatenate([b.hyper_grad, b.d_gamma, b.d_rho])

    return objective
