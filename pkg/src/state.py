import operator
from typing import Annotated, Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing_extensions import TypedDict

from src.efd.catalog import COUNT_FAMILIES, make_likelihood
from src.efd.family import LikelihoodFamily
from src.inference.posterior import InferenceOptions
from src.kernels import KernelSpec, make_kernel
from src.model.fit import FitOptions
from src.model.ggpm import GgpmModel
from src.numerics.quadrature import GaussianExpectationPlan

COUNT_OFFSET = 0.5

EngineId = Literal["taylor", "laplace", "ep", "kld"]


def _split_floats(value: Any) -> Any:
    if isinstance(value, str):
        parts = [p for p in value.replace(",", " ").split() if p]
        return [float(p) for p in parts]
    return value


def _split_names(value: Any) -> Any:
    if isinstance(value, str):
        return [p.strip() for p in value.split(",") if p.strip()]
    return value


# --- Run configuration blocks ---


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MetaConfig(_Block):
    version: Literal[1]
    seed: int = Field(description="Seed for every random draw of the run")


class LikelihoodConfig(_Block):
    id: str
    link: Optional[str] = None
    phi: float = Field(default=1.0, gt=0)
    trials: Optional[int] = Field(default=None, ge=1)
    offset: Optional[float] = Field(default=None, ge=0, description="Count families only; defaults to 0.5 for them")


class KernelConfig(_Block):
    kind: str = "rbf"
    log_hyperparams: Optional[List[float]] = None
    jitter: float = Field(default=1e-8, ge=0)

    @field_validator("log_hyperparams", mode="before")
    @classmethod
    def split_floats(cls, value: Any) -> Any:
        return _split_floats(value)


class EngineConfig(_Block):
    id: EngineId = "ep"


class FitConfig(_Block):
    strategy: Literal["taylor_init", "random_multistart", "single"] = "taylor_init"
    n_random: int = Field(default=50, ge=1)
    top_k: int = Field(default=3, ge=1)
    dedup: float = Field(default=0.05, gt=0)
    init_low: float = -3.0
    init_high: float = 3.0
    gtol: float = Field(default=1e-5, gt=0)
    max_iter: int = Field(default=500, ge=1)


class NumericsConfig(_Block):
    quadrature_order: int = Field(default=61, ge=2)
    quadrature_scheme: Literal["gauss-hermite", "adaptive"] = "gauss-hermite"
    quadrature_tolerance: float = Field(default=1e-10, gt=0)
    quadrature_max_order: int = Field(default=321, ge=2)
    newton_tol: float = Field(default=1e-8, gt=0)
    newton_max_iter: int = Field(default=100, ge=1)
    ep_tol: float = Field(default=1e-6, gt=0)
    ep_max_sweeps: int = Field(default=100, ge=1)
    ep_damping: float = Field(default=0.9, gt=0, le=1)
    ep_adaptive: bool = True
    kld_gtol: float = Field(default=1e-7, gt=0)
    kld_max_iter: int = Field(default=2000, ge=1)


class DataConfig(_Block):
    inputs: Optional[List[str]] = None
    output: str = "y"
    test: Optional[str] = None
    clamp_unit: bool = False

    @field_validator("inputs", mode="before")
    @classmethod
    def split_names(cls, value: Any) -> Any:
        return _split_names(value)


class SampleConfig(_Block):
    grid: Optional[str] = None
    layout: Optional[Literal["extremal", "middle"]] = None
    n_per_region: int = Field(default=10, ge=1)
    n_test: int = Field(default=200, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meta: MetaConfig
    likelihood: LikelihoodConfig
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    engine: EngineConfig = Field(default_factory=EngineConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    sample: SampleConfig = Field(default_factory=SampleConfig)

    @property
    def seed(self) -> int:
        return self.meta.seed

    def make_likelihood(self) -> LikelihoodFamily:
        lk = self.likelihood
        offset = lk.offset
        if offset is None:
            offset = COUNT_OFFSET if lk.id in COUNT_FAMILIES else 0.0
        return make_likelihood(lk.id, phi=lk.phi, link=lk.link, trials=lk.trials, offset=offset)

    def make_kernel(self) -> KernelSpec:
        return make_kernel(self.kernel.kind, self.kernel.log_hyperparams, self.kernel.jitter)

    def inference_options(self) -> InferenceOptions:
        n = self.numerics
        plan = GaussianExpectationPlan(n.quadrature_order, n.quadrature_scheme, n.quadrature_tolerance, n.quadrature_max_order)
        return InferenceOptions(
            plan=plan,
            newton_tol=n.newton_tol,
            newton_max_iter=n.newton_max_iter,
            ep_tol=n.ep_tol,
            ep_max_sweeps=n.ep_max_sweeps,
            ep_damping=n.ep_damping,
            ep_adaptive=n.ep_adaptive,
            kld_gtol=n.kld_gtol,
            kld_max_iter=n.kld_max_iter,
        )

    def build_model(self, x, y, engine: Optional[str] = None) -> GgpmModel:
        return GgpmModel(
            self.make_likelihood(), self.make_kernel(), engine or self.engine.id, x, y, self.inference_options()
        )

    def fit_options(self) -> FitOptions:
        f = self.fit
        return FitOptions(
            strategy=f.strategy,
            n_random=f.n_random,
            top_k=f.top_k,
            dedup=f.dedup,
            init_low=f.init_low,
            init_high=f.init_high,
            gtol=f.gtol,
            max_iter=f.max_iter,
            seed=self.seed,
        )


# --- Reports ---


class OptimumRow(BaseModel):
    engine: str
    stage: str
    start: List[float]
    params: Optional[List[float]]
    log_marginal: Optional[float]
    converged: bool
    iterations: int
    evaluations: int
    status: str
    message: str


class TrainReport(BaseModel):
    command: Literal["train"] = "train"
    likelihood: str
    link: str
    engine: str
    strategy: str
    seed: int
    n_train: int
    log_marginal: float
    hyperparams: Dict[str, float]
    selected: int
    selected_converged: bool = True
    optima: List[OptimumRow]
    diagnostics: Dict[str, Any]
    wall_time: float


class MetricsReport(BaseModel):
    command: Literal["eval"] = "eval"
    n_test: int
    MAE: float
    MSE: float
    NLP: float


class CompareRow(BaseModel):
    engine: str
    status: Literal["ok", "failed"] = "ok"
    error: Optional[str] = None
    log_marginal: Optional[float] = Field(default=None, description="Best optimum of the engine's own refinement")
    shared_log_marginal: Optional[float] = Field(
        default=None, description="Engine marginal at the candidate the Taylor stage selected"
    )
    MAE: Optional[float] = None
    MSE: Optional[float] = None
    NLP: Optional[float] = None
    converged: Optional[bool] = None
    iterations: int = 0
    wall_time: float = 0.0
    hyperparams: Dict[str, float] = Field(default_factory=dict)


class CompareReport(BaseModel):
    command: Literal["compare"] = "compare"
    likelihood: str
    seed: int
    n_train: int
    n_test: int
    shared_params: List[float]
    rows: List[CompareRow]


class GradcheckReport(BaseModel):
    command: Literal["gradcheck"] = "gradcheck"
    engine: str
    likelihood: str
    names: List[str]
    point: List[float]
    analytic: List[float]
    numeric: List[float]
    relative_error: List[float]
    max_relative_error: float
    tolerance: float
    passed: bool


# --- Compare graph state ---


class CompareState(TypedDict, total=False):
    config: RunConfig
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    taylor_optima: List[OptimumRow]
    shared_starts: List[List[float]]
    shared_params: List[float]
    # Use reducers so parallel engine branches
    # append rows instead of overwriting them
    rows: Annotated[List[CompareRow], operator.add]
    report: Optional[CompareReport]
