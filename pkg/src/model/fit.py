"""
Hyperparameter fitting.

Strategies:

- single: optimise the model's engine from its current hyperparameters.
- random_multistart: optimise the model's engine from n_random uniform starts.
- taylor_init: optimise the Taylor marginal from n_random uniform starts,
  keep the top_k unique optima and refine only those with the model's engine.

Per-start failures are recorded in the optima table and never raised.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.errors import NUMERICAL_FAILURES, AllStartsFailed, ConfigError
from src.inference.engines import hyper_objective
from src.inference.kld import initial_params, joint_objective, kld_infer
from src.inference.posterior import InferenceResult, VariationalParams
from src.model.ggpm import GgpmModel
from src.numerics.optimize import MinimizeOptions, minimize

logger = logging.getLogger(__name__)

Strategy = Literal["taylor_init", "random_multistart", "single"]
STRATEGIES = ("taylor_init", "random_multistart", "single")

LOG_BOUND = 12.0
RHO_BOUND = 30.0


@dataclass(frozen=True)
class FitOptions:
    strategy: Strategy = "taylor_init"
    n_random: int = 50
    top_k: int = 3
    dedup: float = 0.05
    init_low: float = -3.0
    init_high: float = 3.0
    gtol: float = 1e-5
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown fit strategy '{self.strategy}'; expected one of {', '.join(STRATEGIES)}")
        if self.n_random < 1 or self.top_k < 1:
            raise ConfigError("n_random and top_k must be at least 1")
        if not self.init_low < self.init_high:
            raise ConfigError("init_low must be below init_high")


@dataclass
class Candidate:
    """One optimiser run: where it started, where it ended and how."""

    engine: str
    stage: str
    start: np.ndarray
    params: Optional[np.ndarray] = None
    log_marginal: float = float("-inf")
    converged: bool = False
    iterations: int = 0
    evaluations: int = 0
    status: str = "pending"
    message: str = ""
    history: List[float] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.params is not None and np.isfinite(self.log_marginal)

    def as_dict(self) -> Dict:
        return {
            "engine": self.engine,
            "stage": self.stage,
            "start": [float(v) for v in self.start],
            "params": None if self.params is None else [float(v) for v in self.params],
            "log_marginal": float(self.log_marginal) if np.isfinite(self.log_marginal) else None,
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "status": self.status,
            "message": self.message,
        }


@dataclass
class FitResult:
    model: GgpmModel
    params: np.ndarray
    result: InferenceResult
    optima: List[Candidate]
    selected: int
    wall_time: float = 0.0

    @property
    def log_marginal(self) -> float:
        return self.result.log_marginal

    @property
    def target_iterations(self) -> int:
        """Optimiser iterations spent on the model's own engine."""
        return sum(c.iterations for c in self.optima if c.stage == "target")

    @property
    def best(self) -> Candidate:
        return self.optima[self.selected]

    @property
    def selected_converged(self) -> bool:
        """False when no start converged and a stalled optimum was kept."""
        return self.best.converged


# ----------------------------------------------------------------------
# Single optimiser run
# ----------------------------------------------------------------------


def _bounds(model: GgpmModel, start: np.ndarray) -> List[Tuple[Optional[float], Optional[float]]]:
    bounds: List[Tuple[Optional[float], Optional[float]]] = [(-LOG_BOUND, LOG_BOUND)] * model.kernel.n_params
    if model.lik.has_dispersion:
        bounds.append((-LOG_BOUND, LOG_BOUND))
    else:
        bounds.append((float(start[-1]), float(start[-1])))
    return bounds


def _fixed_dispersion(model: GgpmModel, start: np.ndarray) -> np.ndarray:
    start = np.array(start, dtype=float)
    if not model.lik.has_dispersion:
        start[-1] = np.log(model.lik.phi)
    return start


def optimize_hyperparams(
    model: GgpmModel, engine: str, start: Sequence[float], options: FitOptions, stage: str = "target"
) -> Tuple[Candidate, Optional[VariationalParams]]:
    """
    Maximise one engine's log marginal from `start`.

    The variational engine optimises hyperparameters and its own
    (gamma, rho) jointly; the variational parameters at the optimum are
    returned for warm-starting the final inference.
    """

    start = _fixed_dispersion(model, np.asarray(start, dtype=float))
    cand = Candidate(engine=engine, stage=stage, start=start)
    p = start.size
    hyper_bounds = _bounds(model, start)
    try:
        if engine == "kld":
            init = initial_params(model.with_hyperparams(start).lik, model.y)
            z0 = np.concatenate([start, init.gamma, np.log(init.lam)])
            n = model.n
            bounds = hyper_bounds + [(None, None)] * n + [(-RHO_BOUND, RHO_BOUND)] * n
            objective = joint_objective(model.lik, model.kernel, model.x, model.y, model.options)
            z, trace = minimize(objective, z0, MinimizeOptions(options.gtol, options.max_iter, bounds=bounds))
            params = z[:p]
            variational = VariationalParams(z[p : p + n], np.exp(z[p + n :]))
        else:
            objective = hyper_objective(engine, model.lik, model.kernel, model.x, model.y, model.options)
            params, trace = minimize(objective, start, MinimizeOptions(options.gtol, options.max_iter, bounds=hyper_bounds))
            variational = None
    except NUMERICAL_FAILURES as exc:
        cand.status = "failed"
        cand.message = str(exc)
        logger.warning("%s start %s failed: %s", engine, np.array2string(start, precision=3), exc)
        return cand, None

    cand.params = np.asarray(params, dtype=float)
    cand.log_marginal = -trace.values[-1] if trace.values else float("-inf")
    cand.converged = trace.converged
    cand.iterations = trace.iterations
    cand.evaluations = trace.evaluations
    cand.status = trace.status
    cand.message = trace.message
    cand.history = [-v for v in trace.values]
    return cand, variational


# ----------------------------------------------------------------------
# Candidate bookkeeping
# ----------------------------------------------------------------------


def random_starts(model: GgpmModel, options: FitOptions) -> np.ndarray:
    rng = np.random.default_rng(options.seed)
    starts = rng.uniform(options.init_low, options.init_high, size=(options.n_random, model.hyperparams.size))
    if not model.lik.has_dispersion:
        starts[:, -1] = np.log(model.lik.phi)
    return starts


def unique_optima(candidates: Sequence[Candidate], top_k: int, threshold: float) -> List[Candidate]:
    """Best-first candidates, dropping any within `threshold` of one already kept."""

    ranked = sorted((c for c in candidates if c.succeeded), key=lambda c: -c.log_marginal)
    kept: List[Candidate] = []
    for cand in ranked:
        if all(np.linalg.norm(cand.params - k.params) >= threshold for k in kept):
            kept.append(cand)
        if len(kept) == top_k:
            break
    return kept


def select_optimum(candidates: Sequence[Candidate]) -> int:
    """Index of the largest log marginal among converged target-stage candidates."""

    target = [i for i, c in enumerate(candidates) if c.stage == "target" and c.succeeded]
    converged = [i for i in target if candidates[i].converged]
    pool = converged or target
    if not pool:
        raise AllStartsFailed(f"all {len(candidates)} optimiser starts failed")
    if not converged:
        logger.warning("no optimiser start converged; selecting the best stalled candidate")
    return max(pool, key=lambda i: candidates[i].log_marginal)


# ----------------------------------------------------------------------
# Strategies
# ----------------------------------------------------------------------


def taylor_stage(model: GgpmModel, options: FitOptions) -> List[Candidate]:
    """Taylor-marginal optima from the random starts."""

    out = []
    for start in random_starts(model, options):
        cand, _ = optimize_hyperparams(model, "taylor", start, options, stage="taylor")
        out.append(cand)
    return out


def shared_starts(model: GgpmModel, options: FitOptions) -> Tuple[List[Candidate], List[np.ndarray]]:
    """The Taylor stage and the top_k unique optima it hands to the other engines."""

    stage = taylor_stage(model, options)
    starts = [c.params for c in unique_optima(stage, options.top_k, options.dedup)]
    if not starts:
        raise AllStartsFailed(f"all {len(stage)} Taylor-stage starts failed")
    logger.info("taylor stage kept %d unique optima from %d starts", len(starts), len(stage))
    return stage, starts


def fit(model: GgpmModel, options: FitOptions = FitOptions()) -> FitResult:
    t0 = time.perf_counter()
    optima: List[Candidate] = []

    if options.strategy == "single":
        starts = [model.hyperparams]
    elif options.strategy == "random_multistart":
        starts = list(random_starts(model, options))
    else:
        stage, starts = shared_starts(model, options)
        optima.extend(stage)
    return refine(model, starts, options, optima, t0)


def refine(
    model: GgpmModel,
    starts: Sequence[np.ndarray],
    options: FitOptions,
    optima: Optional[List[Candidate]] = None,
    t0: Optional[float] = None,
) -> FitResult:
    """Optimise the model's engine from each start and keep the best converged optimum."""

    t0 = time.perf_counter() if t0 is None else t0
    optima = [] if optima is None else optima
    warm: Dict[int, Optional[VariationalParams]] = {}
    for start in starts:
        cand, variational = optimize_hyperparams(model, model.engine, start, options)
        warm[len(optima)] = variational
        optima.append(cand)

    selected = select_optimum(optima)
    params = optima[selected].params
    fitted = model.with_hyperparams(params)
    if model.engine == "kld":
        result = kld_infer(fitted.lik, fitted.kernel, fitted.x, fitted.y, fitted.options, init=warm.get(selected))
    else:
        result = fitted.infer()
    wall = time.perf_counter() - t0
    logger.info(
        "fit strategy=%s engine=%s candidates=%d log_marginal=%.6g", options.strategy, model.engine, len(optima), result.log_marginal
    )
    return FitResult(fitted, np.asarray(params, dtype=float), result, optima, selected, wall)
