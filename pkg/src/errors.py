"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI should use:
2 for validation problems, 3 for numerical failures.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np


class GgpmError(Exception):
    exit_code: int = 3


# --- Validation (exit 2) ---


class ValidationError(GgpmError):
    exit_code = 2


class ConfigError(ValidationError):
    pass


class DataError(ValidationError):
    pass


class DomainError(ValidationError):
    """An output or parameter lies outside the distribution's support."""


class UndefinedPoint(ValidationError):
    """No canonical expansion point exists for an observation."""


class DimensionMismatch(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


class EmptyTestSet(ValidationError):
    pass


# --- Numerical (exit 3) ---


class NumericalError(GgpmError):
    exit_code = 3


class OverflowGuard(NumericalError):
    pass


class SingularCurvature(NumericalError):
    pass


class NegativeCurvature(NumericalError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class NonConcave(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class UnsupportedSampler(NumericalError):
    pass


class LineSearchFailure(NumericalError):
    """Optimizer stopped early; `x` and `fun` hold the best point seen."""

    def __init__(self, message: str, x: Any = None, fun: float | None = None, trace: Any = None):
        super().__init__(message)
        self.x = x
        self.fun = fun
        self.trace = trace


class OptimizerFailure(NumericalError):
    def __init__(self, message: str, best: float | None = None):
        super().__init__(message)
        self.best = best


class AllStartsFailed(NumericalError):
    pass


# Failures raised by numpy/scipy themselves rather than through the
# hierarchy above: singular factorisations, non-finite solver input.
LIBRARY_NUMERICAL_ERRORS = (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError, ValueError)
NUMERICAL_FAILURES = (GgpmError,) + LIBRARY_NUMERICAL_ERRORS
