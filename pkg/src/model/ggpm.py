"""The assembled model: likelihood, kernel, engine and the training data."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.efd.family import LikelihoodFamily
from src.errors import DataError, DimensionMismatch
from src.inference.engines import get_engine, pack_hyperparams, split_hyperparams
from src.inference.posterior import InferenceOptions, InferenceResult
from src.kernels import KernelSpec


@dataclass(frozen=True)
class GgpmModel:
    lik: LikelihoodFamily
    kernel: KernelSpec
    engine: str
    x: np.ndarray
    y: np.ndarray
    options: InferenceOptions = field(default_factory=InferenceOptions)

    def __post_init__(self):
        get_engine(self.engine)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] != y.size:
            raise DimensionMismatch(f"inputs have {x.shape[0]} rows but there are {y.size} outputs")
        if y.size == 0:
            raise DataError("training data is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("training data contains non-finite entries")
        self.lik.check_support(y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def input_dim(self) -> int:
        return self.x.shape[1]

    @property
    def hyperparams(self) -> np.ndarray:
        """[kernel log-hyperparameters..., log phi]."""
        return pack_hyperparams(self.lik, self.kernel)

    @property
    def hyperparam_names(self):
        return self.kernel.param_names + ["log_phi"]

    def with_hyperparams(self, params) -> "GgpmModel":
        lik, kernel = split_hyperparams(self.lik, self.kernel, params)
        return dataclasses.replace(self, lik=lik, kernel=kernel)

    def with_engine(self, engine: str) -> "GgpmModel":
        return dataclasses.replace(self, engine=engine)

    def infer(self, options: Optional[InferenceOptions] = None) -> InferenceResult:
        return get_engine(self.engine)(self.lik, self.kernel, self.x, self.y, options or self.options)
