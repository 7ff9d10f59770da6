"""Synthetic GGPM data: a latent GP draw pushed through the likelihood."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from src.efd.family import LikelihoodFamily
from src.kernels import KernelSpec
from src.numerics.linalg import psd_factor

logger = logging.getLogger(__name__)


class SampledDataset(NamedTuple):
    y: np.ndarray
    eta: np.ndarray


def sample_latent(kernel: KernelSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    fac = psd_factor(kernel.gram(x))
    return fac.lower @ rng.standard_normal(fac.lower.shape[0])


def sample_dataset(lik: LikelihoodFamily, kernel: KernelSpec, x: np.ndarray, seed: int) -> SampledDataset:
    """eta ~ N(0, K(X, X)) through a Cholesky factor, then y_i ~ p(y | theta(eta_i))."""

    rng = np.random.default_rng(seed)
    eta = sample_latent(kernel, x, rng)
    y = np.asarray(lik.sample_output(eta, rng), dtype=float)
    logger.debug("sampled %d outputs from %s (seed=%d)", y.size, lik.id, seed)
    return SampledDataset(y, eta)
