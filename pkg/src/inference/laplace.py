"""
Laplace approximation: Gaussian at the posterior mode.

The mode is found by Newton iteration on a, with eta = K a and
W = -l''(eta):

    a_new = (I + W K)^-1 (W eta + u)

with a backtracking line search on Psi(a) = sum l(eta) - a'eta/2.
Iterates where W has negative entries (non-log-concave likelihoods)
take a damped step with W clipped to a small positive floor. The
approximate log marginal is

    sum l(eta^) - a^'eta^/2 - 1/2 log|I + K W|.

Gradients differentiate through the mode implicitly
(d eta^ = (I + K W)^-1 dK a^ for the kernel).
"""

from __future__ import annotations

import logging

import numpy as np

from src.efd.family import LikelihoodFamily
from src.errors import MaxIterations, NonFinite
from src.inference.posterior import Diagnostics, GaussianPosterior, InferenceOptions, InferenceResult
from src.kernels import KernelSpec
from src.numerics.linalg import site_form

logger = logging.getLogger(__name__)

W_FLOOR = 1e-6
MAX_HALVINGS = 40


def _psi(lik: LikelihoodFamily, y: np.ndarray, a: np.ndarray, eta: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        val = float(np.sum(lik.log_likelihood(y, eta, strict=False)) - 0.5 * a @ eta)
    return val if np.isfinite(val) else -np.inf


def find_mode(
    lik: LikelihoodFamily,
    k: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
    a0: np.ndarray | None = None,
):
    """Newton iterations for the posterior mode; returns (a, eta, iterations, damped)."""

    n = y.size
    a = np.zeros(n) if a0 is None else np.asarray(a0, dtype=float).copy()
    eta = k @ a
    psi = _psi(lik, y, a, eta)
    if not np.isfinite(psi):
        a = np.zeros(n)
        eta = np.zeros(n)
        psi = _psi(lik, y, a, eta)
    if not np.isfinite(psi):
        raise NonFinite(f"{lik.id}: log posterior is not finite at the starting point")

    damped = 0
    warned = False
    for it in range(1, options.newton_max_iter + 1):
        d = lik.derivatives(y, eta)
        if np.max(np.abs(d.d1 - a)) < options.newton_tol:
            return a, eta, it - 1, damped
        w = -d.d2
        if np.any(w <= 0):
            damped += 1
            if not warned:
                logger.warning("%s: likelihood is not log-concave at %d latents; damping Newton steps", lik.id, int(np.sum(w <= 0)))
                warned = True
            w = np.maximum(w, W_FLOOR)
        b = w * eta + d.d1
        form = site_form(k, w)
        a_new = b - form.gain @ (k @ b)
        step = a_new - a

        s = 1.0
        for _ in range(MAX_HALVINGS):
            a_try = a + s * step
            eta_try = k @ a_try
            psi_try = _psi(lik, y, a_try, eta_try)
            if psi_try >= psi - 1e-12 * abs(psi):
                break
            s *= 0.5
        else:
            # no ascent along the Newton direction: at the mode up to rounding
            return a, eta, it, damped
        a, eta, psi = a_try, eta_try, psi_try

    d = lik.derivatives(y, eta)
    if np.max(np.abs(d.d1 - a)) < options.newton_tol:
        return a, eta, options.newton_max_iter, damped
    raise MaxIterations(f"{lik.id}: Newton mode search did not converge in {options.newton_max_iter} iterations")


def laplace_infer(
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
) -> InferenceResult:
    y = np.asarray(y, dtype=float)
    lik.check_support(y)
    k = kernel.gram(x)
    a, eta, iterations, damped = find_mode(lik, k, y, options)

    d = lik.derivatives(y, eta)
    w = -d.d2
    form = site_form(k, w)
    log_marginal = float(np.sum(d.value) - 0.5 * a @ eta - 0.5 * form.logdet)
    site_w = site_t = None
    if np.all(w > 0):
        site_w = 1.0 / w
        site_t = eta + d.d1 / w
    posterior = GaussianPosterior(eta, form.cov, w, a, form.gain, site_w, site_t)

    grad = None
    if options.compute_grad:
        sigma = form.cov
        s2 = 0.5 * np.diag(sigma) * d.d3

        def through_mode(v: np.ndarray) -> np.ndarray:
            # (I + K W)^-1 v
            return v - k @ (form.gain @ v)

        kernel_grad = []
        for g in kernel.gram_gradients(x):
            explicit = 0.5 * a @ g @ a - 0.5 * np.sum(form.gain * g)
            kernel_grad.append(explicit + s2 @ through_mode(g @ a))
        disp = 0.0
        if lik.has_dispersion:
            p = lik.dispersion_partials(y, eta)
            explicit = np.sum(p.value) + 0.5 * np.sum(np.diag(sigma) * p.d2)
            disp = lik.phi * float(explicit + s2 @ through_mode(k @ p.d1))
        grad = np.append(np.asarray(kernel_grad, dtype=float), disp)

    diagnostics = Diagnostics(method="laplace", iterations=iterations, converged=True, damped=damped)
    if np.any(w <= 0):
        diagnostics.extra["non_concave_at_mode"] = int(np.sum(w <= 0))
    logger.debug("engine=laplace iterations=%d damped=%d log_marginal=%.6g", iterations, damped, log_marginal)
    return InferenceResult(posterior, log_marginal, grad, diagnostics, expansion=eta)
