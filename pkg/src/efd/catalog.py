from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from src.efd import distributions as d
from src.efd.family import LikelihoodFamily
from src.efd.links import get_link
from src.errors import ConfigError


@dataclass(frozen=True)
class CatalogEntry:
    factory: Callable[[int], d.Distribution]
    default_link: str
    links: Tuple[str, ...]
    agnostic: bool = False
    fixed_trials: Optional[int] = None


CATALOG: Dict[str, CatalogEntry] = {
    "gaussian": CatalogEntry(lambda n: d.Gaussian(), "canonical", ("canonical",)),
    "gamma_shape": CatalogEntry(lambda n: d.GammaShape(), "negative-exponential", ("negative-exponential",)),
    "gamma_scale": CatalogEntry(lambda n: d.GammaScale(), "exponential", ("exponential",)),
    "inv_gaussian": CatalogEntry(lambda n: d.InverseGaussian(), "negative-exponential", ("negative-exponential",)),
    "poisson": CatalogEntry(lambda n: d.Poisson(), "canonical", ("canonical", "linearized-log-loss")),
    "poisson_linear": CatalogEntry(lambda n: d.Poisson(), "linearized-log-loss", ("linearized-log-loss", "canonical")),
    "com_poisson": CatalogEntry(lambda n: d.ComPoisson(), "canonical", ("canonical", "linearized-log-loss")),
    "com_poisson_linear": CatalogEntry(
        lambda n: d.ComPoisson(), "linearized-log-loss", ("linearized-log-loss", "canonical")
    ),
    "neg_binomial": CatalogEntry(lambda n: d.NegativeBinomial(), "flipped-log-loss", ("flipped-log-loss",)),
    "binomial": CatalogEntry(lambda n: d.Binomial(n), "canonical", ("canonical", "probit"), agnostic=True),
    "bernoulli_logit": CatalogEntry(
        lambda n: d.Binomial(1), "canonical", ("canonical", "probit"), agnostic=True, fixed_trials=1
    ),
    "bernoulli_probit": CatalogEntry(
        lambda n: d.Binomial(1), "probit", ("probit", "canonical"), agnostic=True, fixed_trials=1
    ),
    "beta": CatalogEntry(lambda n: d.Beta(), "logistic", ("logistic",)),
}

COUNT_FAMILIES = ("poisson", "poisson_linear", "com_poisson", "com_poisson_linear", "neg_binomial")


def make_likelihood(
    id: str,
    phi: float = 1.0,
    link: Optional[str] = None,
    trials: Optional[int] = None,
    offset: float = 0.0,
) -> LikelihoodFamily:
    """
    Build a catalog likelihood by id.

    `link` overrides the default link when the distribution admits it.
    `trials` only applies to `binomial`; `offset` only to count families.
    """

    try:
        entry = CATALOG[id]
    except KeyError:
        raise ConfigError(f"unknown likelihood '{id}'; expected one of {sorted(CATALOG)}")

    link_name = link or entry.default_link
    if link_name not in entry.links:
        raise ConfigError(f"likelihood '{id}' does not admit link '{link_name}'; allowed: {list(entry.links)}")
    if trials is not None and id != "binomial":
        raise ConfigError(f"'trials' only applies to binomial, not '{id}'")
    if offset and id not in COUNT_FAMILIES:
        raise ConfigError(f"'offset' only applies to count likelihoods, not '{id}'")

    n = entry.fixed_trials or trials or 1
    return LikelihoodFamily(
        id=id,
        dist=entry.factory(n),
        link=get_link(link_name),
        phi=phi,
        offset=offset,
        agnostic=entry.agnostic,
    )
