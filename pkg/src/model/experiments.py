"""
Synthetic studies comparing the inference engines.

- scalar_ordering: single-observation posteriors against a brute-force mean.
- posterior_ordering: averaged Taylor/Laplace/EP mean gaps over a
  (phi, bandwidth) grid of sampled Gamma-shape datasets.
- region_layout: three-region training data with test points concentrated
  either at the ends ("extremal") or in the middle ("middle").
"""

from __future__ import annotations

import logging
from typing import Iterable, NamedTuple, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, stats

from src.efd.catalog import make_likelihood
from src.efd.family import LikelihoodFamily
from src.errors import NUMERICAL_FAILURES, ConfigError
from src.inference.ep import ep_infer
from src.inference.laplace import laplace_infer
from src.inference.posterior import InferenceOptions
from src.inference.taylor import taylor_infer
from src.kernels import KernelSpec, make_kernel
from src.model.sampling import sample_dataset

logger = logging.getLogger(__name__)

_NO_GRAD = InferenceOptions(compute_grad=False)


# ----------------------------------------------------------------------
# Single observation
# ----------------------------------------------------------------------


class ScalarOrdering(NamedTuple):
    taylor: float
    laplace: float
    ep: float
    exact: float


def _scalar_kernel(prior_var: float) -> KernelSpec:
    return make_kernel("rbf", [0.5 * np.log(prior_var), 0.0], jitter=0.0)


def brute_force_mean(lik: LikelihoodFamily, y: float, prior_var: float, center: float = 0.0, n_grid: int = 200_001) -> float:
    """Posterior mean of eta under N(0, prior_var) by the trapezoid rule over center +/- 12 prior sd."""

    half = 12.0 * np.sqrt(prior_var)
    eta = np.linspace(center - half, center + half, n_grid)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logp = lik.log_likelihood(np.full_like(eta, y), eta, strict=False) - 0.5 * eta**2 / prior_var
    logp = np.where(np.isfinite(logp), logp, -np.inf)
    p = np.exp(logp - np.max(logp))
    return float(integrate.trapezoid(p * eta, eta) / integrate.trapezoid(p, eta))


def scalar_ordering(lik: LikelihoodFamily, y: float, prior_var: float) -> ScalarOrdering:
    kernel = _scalar_kernel(prior_var)
    x = np.zeros((1, 1))
    obs = np.array([float(y)])
    ta = taylor_infer(lik, kernel, x, obs, options=_NO_GRAD).posterior.mean[0]
    la = laplace_infer(lik, kernel, x, obs, _NO_GRAD).posterior.mean[0]
    ep = ep_infer(lik, kernel, x, obs, InferenceOptions(compute_grad=False, ep_tol=1e-10)).posterior.mean[0]
    exact = brute_force_mean(lik, float(y), prior_var, center=float(la))
    return ScalarOrdering(float(ta), float(la), float(ep), exact)


# ----------------------------------------------------------------------
# Averaged multivariate ordering
# ----------------------------------------------------------------------


def ordering_inputs(n_points: int = 40) -> np.ndarray:
    return np.linspace(0.0, 10.0, n_points)[:, None]


def posterior_ordering(
    phis: Iterable[float],
    bandwidths: Iterable[float],
    n_trials: int = 100,
    n_points: int = 40,
    scale: float = 2.0,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Mean latent gaps (Laplace - Taylor, EP - Laplace) per (phi, bandwidth) cell.

    `scale` is the RBF prior variance and `bandwidth` its length scale.
    Each cell draws `n_trials` Gamma-shape datasets on `n_points` inputs.
    """

    x = ordering_inputs(n_points)
    root = np.random.SeedSequence(seed)
    rows = []
    cells = [(float(p), float(b)) for p in phis for b in bandwidths]
    for (phi, bandwidth), child in zip(cells, root.spawn(len(cells))):
        lik = make_likelihood("gamma_shape", phi=phi)
        kernel = make_kernel("rbf", [0.5 * np.log(scale), np.log(bandwidth)])
        ta_la, la_ep, failures = [], [], 0
        for trial_seed in child.generate_state(n_trials):
            y = sample_dataset(lik, kernel, x, int(trial_seed)).y
            try:
                mu_ta = taylor_infer(lik, kernel, x, y, options=_NO_GRAD).posterior.mean
                mu_la = laplace_infer(lik, kernel, x, y, _NO_GRAD).posterior.mean
                mu_ep = ep_infer(lik, kernel, x, y, _NO_GRAD).posterior.mean
            except NUMERICAL_FAILURES as exc:
                failures += 1
                logger.warning("ordering trial phi=%.3g bandwidth=%.3g failed: %s", phi, bandwidth, exc)
                continue
            ta_la.append(float(np.mean(mu_la - mu_ta)))
            la_ep.append(float(np.mean(mu_ep - mu_la)))
        rows.append(
            {
                "phi": phi,
                "bandwidth": bandwidth,
                "la_minus_ta": float(np.mean(ta_la)) if ta_la else float("nan"),
                "ep_minus_la": float(np.mean(la_ep)) if la_ep else float("nan"),
                "trials": len(ta_la),
                "failures": failures,
            }
        )
    return pd.DataFrame(rows)


def gap_trend(frame: pd.DataFrame, column: str) -> float:
    """Spearman correlation of a gap column with phi, pooled over bandwidths."""

    rho, _ = stats.spearmanr(frame["phi"], frame[column])
    return float(rho)


# ----------------------------------------------------------------------
# Region layouts
# ----------------------------------------------------------------------

REGIONS: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (4.5, 5.5), (9.0, 10.0))
LAYOUT_WEIGHTS = {
    "extremal": (0.4, 0.2, 0.4),
    "middle": (0.1, 0.8, 0.1),
}


class RegionLayout(NamedTuple):
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    region_test: np.ndarray
    eta_train: np.ndarray
    eta_test: np.ndarray


def region_layout(
    layout: str,
    lik: LikelihoodFamily | None = None,
    n_per_region: int = 10,
    n_test: int = 200,
    trend: Tuple[float, float] = (0.0, 0.3),
    spread: float = 0.1,
    offsets: Tuple[float, float, float] = (0.0, 0.0, 0.0),
    seed: int = 0,
) -> RegionLayout:
    """
    Training points in three separated regions along an exponential trend.

    Test points are drawn near training points, picking the region with
    the layout's weights, so the test set is either end-heavy or
    middle-heavy. `offsets` shifts the latent of each region off the trend.
    """

    if layout not in LAYOUT_WEIGHTS:
        raise ConfigError(f"unknown layout '{layout}'; expected one of {sorted(LAYOUT_WEIGHTS)}")
    lik = lik or make_likelihood("gamma_shape", phi=0.5)
    rng = np.random.default_rng(seed)

    def latent(x, r):
        return trend[0] + trend[1] * x + np.asarray(offsets, dtype=float)[r]

    x_train = np.concatenate([rng.uniform(lo, hi, n_per_region) for lo, hi in REGIONS])
    eta_train = latent(x_train, np.repeat(np.arange(len(REGIONS)), n_per_region))
    y_train = np.asarray(lik.sample_output(eta_train, rng), dtype=float)

    region = rng.choice(len(REGIONS), size=n_test, p=LAYOUT_WEIGHTS[layout])
    anchors = np.array([rng.choice(x_train[r * n_per_region : (r + 1) * n_per_region]) for r in region])
    bounds = np.array(REGIONS)[region]
    x_test = np.clip(anchors + spread * rng.standard_normal(n_test), bounds[:, 0], bounds[:, 1])
    eta_test = latent(x_test, region)
    y_test = np.asarray(lik.sample_output(eta_test, rng), dtype=float)
    return RegionLayout(x_train[:, None], y_train, x_test[:, None], y_test, region, eta_train, eta_test)
