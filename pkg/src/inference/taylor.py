"""
Second-order Taylor approximation of the log-likelihood.

Expanding log p(y_i | eta_i) at eta~_i gives a Gaussian site with
variance w_i = -1/l''(eta~_i) centred at t_i = eta~_i + w_i u_i, so the
posterior is GP regression on targets t with per-point noise w. The
approximate log marginal is

    -1/2 t'(K + W)^-1 t - 1/2 log|K + W| + sum_i r_i,
    r_i = l(eta~_i) + 1/2 w_i u_i^2 + 1/2 log w_i.

No iteration is involved: one factorisation of K + W.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Union

import numpy as np

from src.efd.family import LikelihoodFamily
from src.errors import ConfigError, DimensionMismatch, NegativeCurvature, SingularCurvature
from src.inference.posterior import Diagnostics, GaussianPosterior, InferenceOptions, InferenceResult
from src.kernels import KernelSpec
from src.numerics.linalg import psd_factor

logger = logging.getLogger(__name__)

Expansion = Union[str, np.ndarray]


class TransformedTargets(NamedTuple):
    """GP-regression targets and per-point noise equivalent to Taylor inference."""

    eta: np.ndarray
    t: np.ndarray
    w: np.ndarray


def expansion_points(lik: LikelihoodFamily, y: np.ndarray, expansion: Expansion = "canonical") -> np.ndarray:
    if isinstance(expansion, str):
        if expansion == "canonical":
            return lik.canonical_expansion_point(y)
        if expansion == "agnostic":
            return np.zeros_like(np.asarray(y, dtype=float))
        raise ConfigError(f"unknown expansion '{expansion}'")
    eta = np.asarray(expansion, dtype=float)
    if eta.shape != np.shape(y):
        raise DimensionMismatch("explicit expansion points must match y in shape")
    return eta


def transformed_targets(lik: LikelihoodFamily, y, expansion: Expansion = "canonical") -> TransformedTargets:
    """
    Targets t~ and noise w~ of the equivalent GP regression.

    - bernoulli (eta~=0): t~ = 4(y - 1/2), w~ = 4/N
    - poisson, offset 0: t~ = log y, w~ = 1/y
    - gamma_shape: t~ = log y, w~ = phi
    - inv_gaussian: t~ = log 2y^2, w~ = 4 phi y
    """

    y = np.asarray(y, dtype=float)
    lik.check_support(y)
    eta = expansion_points(lik, y, expansion)
    d = lik.derivatives(y, eta)
    if np.any(d.d2 == 0):
        i = int(np.flatnonzero(d.d2 == 0)[0])
        raise SingularCurvature(f"{lik.id}: zero curvature at observation {i}")
    if np.any(d.d2 > 0):
        i = int(np.flatnonzero(d.d2 > 0)[0])
        raise NegativeCurvature(f"{lik.id}: negative site variance at observation {i}", index=i)
    w = -1.0 / d.d2
    return TransformedTargets(eta, eta + w * d.d1, w)


def taylor_infer(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    expansion: Expansion = "canonical",
    options: InferenceOptions = InferenceOptions(),
) -> InferenceResult:
    y = np.asarray(y, dtype=float)
    eta, t, w = transformed_targets(lik, y, expansion)
    d = lik.derivatives(y, eta)
    u = d.d1

    k = kernel.gram(x)
    fac = psd_factor(k + np.diag(w))
    z = fac.solve(t)
    r = d.value + 0.5 * w * u**2 + 0.5 * np.log(w)
    log_marginal = float(-0.5 * t @ z - 0.5 * fac.logdet + np.sum(r))

    posterior = GaussianPosterior.from_common_form(k, w, t)
    grad = None
    if options.compute_grad:
        c = fac.inverse()
        dl_dw = 0.5 * z**2 - 0.5 * np.diag(c)
        kernel_grad = [0.5 * z @ g @ z - 0.5 * np.sum(c * g) for g in kernel.gram_gradients(x)]
        disp = 0.0
        if lik.has_dispersion:
            p = lik.dispersion_partials(y, eta)
            dw = w**2 * p.d2
            du = p.d1
            dt = dw * u + w * du
            dr = p.value + 0.5 * dw * u**2 + w * u * du + 0.5 * dw / w
            disp = float(np.sum(dl_dw * dw - z * dt + dr))
            if isinstance(expansion, str) and expansion == "canonical":
                deta = lik.expansion_point_dphi(y)
                if np.any(deta != 0):
                    w1 = w**2 * d.d3
                    dl_deta = dl_dw * w1 - z * w1 * u + 0.5 * w1 * (u**2 + 1.0 / w)
                    disp += float(np.sum(dl_deta * deta))
            disp *= lik.phi
        grad = np.append(np.asarray(kernel_grad, dtype=float), disp)

    logger.debug("engine=taylor n=%d log_marginal=%.6g", y.size, log_marginal)
    return InferenceResult(
        posterior=posterior,
        log_marginal=log_marginal,
        grad=grad,
        diagnostics=Diagnostics(method="taylor", iterations=1, converged=True),
        expansion=eta,
    )
