"""Output-space predictive distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.efd.family import LikelihoodFamily
from src.inference.engines import latent_predict
from src.inference.ep import tilted_moments
from src.inference.posterior import InferenceResult
from src.model.ggpm import GgpmModel
from src.numerics.quadrature import GaussianExpectationPlan, gaussian_expect


@dataclass(frozen=True)
class PredictiveDistribution:
    """
    p(y* | data) = E_N(eta | latent_mean, latent_var)[p(y* | theta(eta))] per test point.
    """

    lik: LikelihoodFamily
    latent_mean: np.ndarray
    latent_var: np.ndarray
    plan: GaussianExpectationPlan = GaussianExpectationPlan()

    def __len__(self) -> int:
        return self.latent_mean.size

    @property
    def mean(self) -> np.ndarray:
        def out_mean(eta):
            return self.lik.output_moments(eta)[0]

        with np.errstate(over="ignore"):
            return gaussian_expect(out_mean, self.latent_mean, self.latent_var, self.plan)

    @property
    def variance(self) -> np.ndarray:
        """Total variance: E[Var(y | eta)] + Var(E[y | eta])."""

        def stacked(eta):
            m, v = self.lik.output_moments(eta)
            return np.stack([m, m**2, v])

        with np.errstate(over="ignore"):
            e = gaussian_expect(stacked, self.latent_mean, self.latent_var, self.plan)
        return np.maximum(e[2] + e[1] - e[0] ** 2, 0.0)

    def log_density(self, y) -> np.ndarray:
        """log p(y* | data) at y aligned with the test points (broadcasts)."""

        y, m, v = np.broadcast_arrays(np.asarray(y, dtype=float), self.latent_mean, self.latent_var)
        mom = tilted_moments(self.lik, y.ravel(), m.ravel(), v.ravel(), self.plan.adaptive())
        return mom.log_z.reshape(y.shape)

    def density(self, y) -> np.ndarray:
        return np.exp(self.log_density(y))

    @property
    def mode(self) -> Optional[np.ndarray]:
        """Most probable output for discrete supports; None otherwise."""

        if not self.lik.discrete:
            return None
        means, variances = self.mean, self.variance
        out = np.empty(len(self))
        for i in range(len(self)):
            grid = self.lik.support_grid(float(means[i]), float(variances[i]))
            logp = tilted_moments(
                self.lik,
                grid,
                np.full(grid.size, self.latent_mean[i]),
                np.full(grid.size, self.latent_var[i]),
                self.plan.adaptive(),
            ).log_z
            out[i] = grid[int(np.argmax(logp))]
        return out

    @property
    def point(self) -> np.ndarray:
        """Mode for count and fraction supports, mean otherwise."""

        mode = self.mode
        return self.mean if mode is None else mode


def predict(
    model: GgpmModel,
    x_star,
    result: Optional[InferenceResult] = None,
    plan: Optional[GaussianExpectationPlan] = None,
) -> PredictiveDistribution:
    result = result or model.infer()
    mu, var = latent_predict(result, model.kernel, model.x, np.asarray(x_star, dtype=float))
    return PredictiveDistribution(model.lik, mu, var, plan or model.options.plan)
