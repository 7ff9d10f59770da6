from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from src.errors import DimensionMismatch, EmptyTestSet
from src.model.predict import PredictiveDistribution


@dataclass(frozen=True)
class Metrics:
    mae: float
    mse: float
    nlp: float

    def as_dict(self) -> Dict[str, float]:
        return {"MAE": self.mae, "MSE": self.mse, "NLP": self.nlp}


def nlp_contributions(pred: PredictiveDistribution, y) -> np.ndarray:
    """-log p(y_i | data) for each test point."""
    return -pred.log_density(np.asarray(y, dtype=float))


def evaluate(pred: PredictiveDistribution, y, point: np.ndarray | None = None) -> Metrics:
    """
    MAE and MSE of the point predictions and the mean negative log predictive density.

    Count and fraction supports predict with the mode, others with the mean.
    """

    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise EmptyTestSet("the test set has no rows")
    if y.size != len(pred):
        raise DimensionMismatch(f"{len(pred)} predictions for {y.size} test outputs")
    point = pred.point if point is None else np.asarray(point, dtype=float)
    err = point - y
    nlp = nlp_contributions(pred, y)
    return Metrics(float(np.mean(np.abs(err))), float(np.mean(err**2)), float(np.mean(nlp)))
