"""Exponential-family likelihoods: distributions, links and the likelihood catalog."""

from __future__ import annotations

import numpy as np

from src.efd.catalog import CATALOG, make_likelihood
from src.efd.com_poisson import com_poisson_log_partition
from src.efd.distributions import Distribution, Support
from src.efd.family import LikelihoodFamily
from src.efd.links import LINKS, Link, get_link


def log_likelihood(lik: LikelihoodFamily, y, eta):
    return lik.log_likelihood(y, eta)


def derivative_functions(lik: LikelihoodFamily, y, eta):
    return lik.derivative_functions(y, eta)


def canonical_expansion_point(lik: LikelihoodFamily, y):
    return lik.canonical_expansion_point(y)


def mean_and_variance(lik: LikelihoodFamily, eta):
    return lik.mean_and_variance(eta)


def sample_output(lik: LikelihoodFamily, eta, rng: np.random.Generator):
    return lik.sample_output(eta, rng)


__all__ = [
    "CATALOG",
    "LINKS",
    "Distribution",
    "LikelihoodFamily",
    "Link",
    "Support",
    "canonical_expansion_point",
    "com_poisson_log_partition",
    "derivative_functions",
    "get_link",
    "log_likelihood",
    "make_likelihood",
    "mean_and_variance",
    "sample_output",
]
