"""Engine registry, the hyperparameter objective and latent prediction."""

from __future__ import annotations

import logging
from typing import Callable, Dict, Tuple

import numpy as np

from src.efd.family import LikelihoodFamily
from src.errors import ConfigError, NotPSD
from src.inference.ep import ep_infer
from src.inference.kld import kld_infer
from src.inference.laplace import laplace_infer
from src.inference.posterior import InferenceOptions, InferenceResult
from src.inference.taylor import taylor_infer
from src.kernels import KernelSpec

logger = logging.getLogger(__name__)

Engine = Callable[[LikelihoodFamily, KernelSpec, np.ndarray, np.ndarray, InferenceOptions], InferenceResult]

ENGINES: Dict[str, Engine] = {
    "taylor": lambda lik, kernel, x, y, options: taylor_infer(lik, kernel, x, y, "canonical", options),
    "laplace": laplace_infer,
    "ep": ep_infer,
    "kld": kld_infer,
}

ENGINE_ORDER = ("taylor", "laplace", "ep", "kld")


def get_engine(name: str) -> Engine:
    try:
        return ENGINES[name]
    except KeyError:
        raise ConfigError(f"unknown engine '{name}'; expected one of {', '.join(ENGINE_ORDER)}") from None


def run_engine(
    name: str,
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
) -> InferenceResult:
    return get_engine(name)(lik, kernel, np.asarray(x, dtype=float), np.asarray(y, dtype=float), options)


def split_hyperparams(
    lik: LikelihoodFamily, kernel: KernelSpec, params: np.ndarray
) -> Tuple[LikelihoodFamily, KernelSpec]:
    """[kernel log params..., log phi] -> (likelihood, kernel) at those values."""

    params = np.asarray(params, dtype=float)
    p = kernel.n_params
    kernel = kernel.with_log_hyperparams(params[:p])
    if lik.has_dispersion:
        lik = lik.with_dispersion(float(np.exp(params[p])))
    return lik, kernel


def pack_hyperparams(lik: LikelihoodFamily, kernel: KernelSpec) -> np.ndarray:
    return np.append(kernel.log_hyperparams, np.log(lik.phi))


def hyper_objective(
    name: str,
    lik: LikelihoodFamily,
    kernel: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    options: InferenceOptions = InferenceOptions(),
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """Negative log marginal and its gradient as functions of the packed log-hyperparameters."""

    engine = get_engine(name)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def objective(params: np.ndarray) -> Tuple[float, np.ndarray]:
        lk, kern = split_hyperparams(lik, kernel, params)
        result = engine(lk, kern, x, y, options)
        return -result.log_marginal, -result.grad

    return objective


def latent_predict(
    result: InferenceResult, kernel: KernelSpec, x: np.ndarray, x_star: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Latent mean and variance at x_star.

    mu = k*' alpha and var = k** - k*' gain k*, clipped into (0, k**].
    """

    post = result.posterior
    ks = kernel.gram(x, x_star)
    kss = kernel.prior_variance(x_star)
    mu = ks.T @ post.alpha
    var = kss - np.einsum("ij,ij->j", ks, post.gain @ ks)
    if np.any(~np.isfinite(var)) or np.any(var < -1e-8 * np.maximum(kss, 1.0)):
        raise NotPSD("predictive latent variance is negative")
    tiny = np.finfo(float).tiny
    return mu, np.clip(var, tiny, np.maximum(kss, tiny))
