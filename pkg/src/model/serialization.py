"""
Versioned JSON model files.

A model file is self-describing: likelihood id, link and auxiliaries,
the kernel with its log-hyperparameters, the engine, the numerics
settings and the training data itself, so predictions reconstruct
bit-identically without the original CSV.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from src.efd.catalog import make_likelihood
from src.efd.family import LikelihoodFamily
from src.errors import SchemaMismatch
from src.inference.posterior import InferenceOptions
from src.kernels import KernelSpec
from src.model.ggpm import GgpmModel
from src.numerics.quadrature import GaussianExpectationPlan
from src.utils.files import atomic_write_text

MODEL_FORMAT = "ggpm-model"
MODEL_VERSION = 1


class LoadedModel(NamedTuple):
    model: GgpmModel
    input_columns: List[str]
    output_column: str


class LikelihoodRecord(BaseModel):
    id: str
    link: str
    phi: float
    trials: Optional[int] = None
    offset: float = 0.0


class NumericsRecord(BaseModel):
    quadrature_order: int = 61
    quadrature_scheme: Literal["gauss-hermite", "adaptive"] = "gauss-hermite"
    quadrature_tolerance: float = 1e-10
    quadrature_max_order: int = 321
    newton_tol: float = 1e-8
    newton_max_iter: int = 100
    ep_tol: float = 1e-6
    ep_max_sweeps: int = 100
    ep_damping: float = 0.9
    ep_adaptive: bool = True
    kld_gtol: float = 1e-7
    kld_max_iter: int = 2000


class ModelFile(BaseModel):
    format: Literal["ggpm-model"] = MODEL_FORMAT
    version: int = MODEL_VERSION
    likelihood: LikelihoodRecord
    kernel: Dict[str, Any]
    engine: str
    hyperparam_names: List[str]
    log_hyperparams: List[float]
    numerics: NumericsRecord = Field(default_factory=NumericsRecord)
    input_columns: List[str]
    output_column: str = "y"
    x: List[List[float]]
    y: List[float]
    data_path: Optional[str] = None


def likelihood_record(lik: LikelihoodFamily) -> LikelihoodRecord:
    trials = getattr(lik.dist, "trials", None) if lik.id == "binomial" else None
    return LikelihoodRecord(id=lik.id, link=lik.link.name, phi=lik.phi, trials=trials, offset=lik.offset)


def options_record(options: InferenceOptions) -> NumericsRecord:
    plan = options.plan
    return NumericsRecord(
        quadrature_order=plan.order,
        quadrature_scheme=plan.scheme,
        quadrature_tolerance=plan.tolerance,
        quadrature_max_order=plan.max_order,
        newton_tol=options.newton_tol,
        newton_max_iter=options.newton_max_iter,
        ep_tol=options.ep_tol,
        ep_max_sweeps=options.ep_max_sweeps,
        ep_damping=options.ep_damping,
        ep_adaptive=options.ep_adaptive,
        kld_gtol=options.kld_gtol,
        kld_max_iter=options.kld_max_iter,
    )


def options_from_record(rec: NumericsRecord) -> InferenceOptions:
    plan = GaussianExpectationPlan(
        rec.quadrature_order, rec.quadrature_scheme, rec.quadrature_tolerance, rec.quadrature_max_order
    )
    return InferenceOptions(
        plan=plan,
        newton_tol=rec.newton_tol,
        newton_max_iter=rec.newton_max_iter,
        ep_tol=rec.ep_tol,
        ep_max_sweeps=rec.ep_max_sweeps,
        ep_damping=rec.ep_damping,
        ep_adaptive=rec.ep_adaptive,
        kld_gtol=rec.kld_gtol,
        kld_max_iter=rec.kld_max_iter,
    )


def to_model_file(
    model: GgpmModel, input_columns: List[str], output_column: str = "y", data_path: Optional[str] = None
) -> ModelFile:
    return ModelFile(
        likelihood=likelihood_record(model.lik),
        kernel=model.kernel.to_dict(),
        engine=model.engine,
        hyperparam_names=model.hyperparam_names,
        log_hyperparams=[float(v) for v in model.hyperparams],
        numerics=options_record(model.options),
        input_columns=list(input_columns),
        output_column=output_column,
        x=[[float(v) for v in row] for row in model.x],
        y=[float(v) for v in model.y],
        data_path=data_path,
    )


def from_model_file(doc: ModelFile) -> GgpmModel:
    rec = doc.likelihood
    lik = make_likelihood(rec.id, phi=rec.phi, link=rec.link, trials=rec.trials, offset=rec.offset)
    kernel = KernelSpec.from_dict(doc.kernel)
    x = np.asarray(doc.x, dtype=float)
    y = np.asarray(doc.y, dtype=float)
    return GgpmModel(lik, kernel, doc.engine, x, y, options_from_record(doc.numerics))


def save_model(
    path: str | Path,
    model: GgpmModel,
    input_columns: List[str],
    output_column: str = "y",
    data_path: Optional[str] = None,
) -> Path:
    doc = to_model_file(model, input_columns, output_column, data_path)
    return atomic_write_text(path, doc.model_dump_json(indent=2) + "\n")


def load_model(path: str | Path) -> LoadedModel:
    """Read a model file; SchemaMismatch on an unknown format or version."""

    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"{path}: not a readable model file ({exc})") from exc
    if not isinstance(raw, dict) or raw.get("format") != MODEL_FORMAT:
        raise SchemaMismatch(f"{path}: not a {MODEL_FORMAT} file")
    if raw.get("version") != MODEL_VERSION:
        raise SchemaMismatch(f"{path}: model file version {raw.get('version')!r} is not supported (expected {MODEL_VERSION})")
    try:
        doc = ModelFile.model_validate(raw)
    except PydanticValidationError as exc:
        raise SchemaMismatch(f"{path}: {exc.errors()[0]['loc']}: {exc.errors()[0]['msg']}") from exc
    return LoadedModel(from_model_file(doc), doc.input_columns, doc.output_column)
