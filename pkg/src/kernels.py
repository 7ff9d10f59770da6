"""
Covariance functions with log-scale hyperparameters.

- RBF:    k(x, x') = s^2 exp(-|x - x'|^2 / (2 l^2)), params (log s, log l)
- Linear: k(x, x') = s^2 x.x', params (log s)
- Sum:    parts added; parameters concatenated in part order

Kernels are immutable; `with_log_params` returns a new instance.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from src.errors import ConfigError, DimensionMismatch


def _as_inputs(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"inputs must be an n x d matrix, got shape {x.shape}")
    return x


def _check_pair(x1: np.ndarray, x2: np.ndarray) -> None:
    if x1.shape[1] != x2.shape[1]:
        raise DimensionMismatch(f"input dimensions differ: {x1.shape[1]} vs {x2.shape[1]}")


class Kernel(ABC):
    kind: str = "kernel"

    @property
    @abstractmethod
    def log_params(self) -> np.ndarray: ...

    @property
    def n_params(self) -> int:
        return self.log_params.size

    @property
    @abstractmethod
    def param_names(self) -> List[str]: ...

    @abstractmethod
    def with_log_params(self, params: Sequence[float]) -> "Kernel": ...

    @abstractmethod
    def cov(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def cov_gradients(self, x: np.ndarray) -> List[np.ndarray]:
        """dK/d(log param) for each parameter, on K(x, x)."""

    @abstractmethod
    def diag(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]: ...


@dataclass(frozen=True)
class RBF(Kernel):
    log_scale: float = 0.0
    log_bandwidth: float = 0.0
    kind = "rbf"

    @property
    def log_params(self) -> np.ndarray:
        return np.array([self.log_scale, self.log_bandwidth])

    @property
    def param_names(self) -> List[str]:
        return ["rbf.log_scale", "rbf.log_bandwidth"]

    def with_log_params(self, params):
        return RBF(float(params[0]), float(params[1]))

    def _sq_dist(self, x1, x2):
        return cdist(x1, x2, "sqeuclidean")

    def cov(self, x1, x2):
        s2 = np.exp(2.0 * self.log_scale)
        l2 = np.exp(2.0 * self.log_bandwidth)
        return s2 * np.exp(-0.5 * self._sq_dist(x1, x2) / l2)

    def cov_gradients(self, x):
        d2 = self._sq_dist(x, x)
        k = self.cov(x, x)
        return [2.0 * k, k * d2 / np.exp(2.0 * self.log_bandwidth)]

    def diag(self, x):
        return np.full(x.shape[0], np.exp(2.0 * self.log_scale))

    def to_dict(self):
        return {"kind": "rbf", "log_scale": self.log_scale, "log_bandwidth": self.log_bandwidth}


@dataclass(frozen=True)
class Linear(Kernel):
    log_scale: float = 0.0
    kind = "linear"

    @property
    def log_params(self) -> np.ndarray:
        return np.array([self.log_scale])

    @property
    def param_names(self) -> List[str]:
        return ["linear.log_scale"]

    def with_log_params(self, params):
        return Linear(float(params[0]))

    def cov(self, x1, x2):
        return np.exp(2.0 * self.log_scale) * (x1 @ x2.T)

    def cov_gradients(self, x):
        return [2.0 * self.cov(x, x)]

    def diag(self, x):
        return np.exp(2.0 * self.log_scale) * np.sum(x * x, axis=1)

    def to_dict(self):
        return {"kind": "linear", "log_scale": self.log_scale}


@dataclass(frozen=True)
class Sum(Kernel):
    parts: Tuple[Kernel, ...]
    kind = "sum"

    @property
    def log_params(self) -> np.ndarray:
        return np.concatenate([p.log_params for p in self.parts])

    @property
    def param_names(self) -> List[str]:
        return [f"{i}.{name}" for i, p in enumerate(self.parts) for name in p.param_names]

    def with_log_params(self, params):
        params = np.asarray(params, dtype=float)
        out, start = [], 0
        for p in self.parts:
            out.append(p.with_log_params(params[start : start + p.n_params]))
            start += p.n_params
        return Sum(tuple(out))

    def cov(self, x1, x2):
        return sum(p.cov(x1, x2) for p in self.parts)

    def cov_gradients(self, x):
        return [g for p in self.parts for g in p.cov_gradients(x)]

    def diag(self, x):
        return sum(p.diag(x) for p in self.parts)

    def to_dict(self):
        return {"kind": "sum", "parts": [p.to_dict() for p in self.parts]}


# ----------------------------------------------------------------------
# Kernel spec: kernel + jitter
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """
    A kernel plus relative diagonal jitter.

    On K(X, X) the diagonal receives jitter * mean(prior variance), which
    is jitter * s^2 for a lone RBF.
    """

    kernel: Kernel
    jitter: float = 1e-8

    @property
    def kind(self) -> str:
        return self.kernel.kind

    @property
    def log_hyperparams(self) -> np.ndarray:
        return self.kernel.log_params

    @property
    def n_params(self) -> int:
        return self.kernel.n_params

    @property
    def param_names(self) -> List[str]:
        return self.kernel.param_names

    def with_log_hyperparams(self, params: Sequence[float]) -> "KernelSpec":
        params = np.asarray(params, dtype=float)
        if params.size != self.n_params:
            raise DimensionMismatch(f"expected {self.n_params} kernel hyperparameters, got {params.size}")
        return KernelSpec(self.kernel.with_log_params(params), self.jitter)

    def gram(self, x1: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
        a = _as_inputs(x1)
        if x2 is None:
            k = self.kernel.cov(a, a)
            k = 0.5 * (k + k.T)
            return k + self.jitter * self._scale(a) * np.eye(a.shape[0])
        b = _as_inputs(x2)
        _check_pair(a, b)
        return self.kernel.cov(a, b)

    def gram_gradients(self, x: np.ndarray) -> List[np.ndarray]:
        a = _as_inputs(x)
        n = a.shape[0]
        grads = []
        for g in self.kernel.cov_gradients(a):
            g = 0.5 * (g + g.T)
            grads.append(g + self.jitter * float(np.mean(np.diag(g))) * np.eye(n))
        return grads

    def prior_variance(self, x: np.ndarray) -> np.ndarray:
        """k(x, x) for each row, without jitter."""
        return self.kernel.diag(_as_inputs(x))

    def _scale(self, x: np.ndarray) -> float:
        return float(np.mean(self.kernel.diag(x))) if x.shape[0] else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kernel": self.kernel.to_dict(), "jitter": self.jitter}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelSpec":
        return cls(kernel_from_dict(data["kernel"]), float(data.get("jitter", 1e-8)))


def kernel_from_dict(data: Dict[str, Any]) -> Kernel:
    kind = data.get("kind")
    if kind == "rbf":
        return RBF(float(data.get("log_scale", 0.0)), float(data.get("log_bandwidth", 0.0)))
    if kind == "linear":
        return Linear(float(data.get("log_scale", 0.0)))
    if kind == "sum":
        return Sum(tuple(kernel_from_dict(p) for p in data["parts"]))
    raise ConfigError(f"unknown kernel kind '{kind}'")


def make_kernel(kind: str, log_hyperparams: Sequence[float] | None = None, jitter: float = 1e-8) -> KernelSpec:
    """Kernel from a config-style kind: rbf | linear | linear+rbf."""

    parts = []
    for name in kind.replace(" ", "").split("+"):
        if name == "rbf":
            parts.append(RBF())
        elif name == "linear":
            parts.append(Linear())
        else:
            raise ConfigError(f"unknown kernel kind '{name}'; expected rbf, linear or a '+' combination")
    kernel: Kernel = parts[0] if len(parts) == 1 else Sum(tuple(parts))
    spec = KernelSpec(kernel, jitter)
    if log_hyperparams is not None:
        spec = spec.with_log_hyperparams(log_hyperparams)
    return spec


def gram(kernel: KernelSpec, x1: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    return kernel.gram(x1, x2)


def gram_gradients(kernel: KernelSpec, x: np.ndarray) -> List[np.ndarray]:
    return kernel.gram_gradients(x)
