from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.efd.distributions import Support
from src.errors import ConfigError, DimensionMismatch, EmptyTestSet, GgpmError
from src.inference.engines import ENGINE_ORDER, hyper_objective
from src.model.experiments import region_layout
from src.model.fit import fit
from src.model.metrics import evaluate, nlp_contributions
from src.model.predict import PredictiveDistribution, predict
from src.model.sampling import sample_dataset
from src.model.serialization import load_model, save_model
from src.numerics.gradcheck import check_gradient
from src.state import (
    CompareReport,
    CompareState,
    EngineConfig,
    GradcheckReport,
    MetricsReport,
    OptimumRow,
    RunConfig,
    TrainReport,
)
from src.tools.config_tools import load_config
from src.tools.dataset_tools import Dataset, dataset_frame, load_dataset, parse_grid, resolve_inputs, write_csv
from src.tools.report_tools import render_compare_table, reported_time, write_json_report
from src.utils.log import configure_logging

load_dotenv()

logger = logging.getLogger("ggpm")

COMMANDS = ("train", "predict", "eval", "sample", "compare", "curve", "gradcheck", "surface")
GRADCHECK_TOLERANCE = {"taylor": 1e-4, "laplace": 1e-4, "ep": 1e-3, "kld": 1e-3}
GRADCHECK_FLOOR = 1e-4
SURFACE_GRID = "-3:3:21"
DENSITY_POINTS = 200


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------


def _require(value: Any, flag: str, command: str) -> Any:
    if value in (None, ""):
        raise ConfigError(f"{command} needs {flag}")
    return value


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(_require(args.config, "--config", args.command), seed=args.seed)
    if args.engine:
        config = config.model_copy(update={"engine": EngineConfig(id=args.engine)})
    return config


def _load_training(config: RunConfig, path: str) -> Dataset:
    return load_dataset(
        path,
        config.make_likelihood(),
        config.data.inputs,
        config.data.output,
        clamp_unit=config.data.clamp_unit,
    )


def _plain(values: Dict[str, Any]) -> Dict[str, Any]:
    """numpy scalars -> builtins so pydantic can serialise them."""

    out = {}
    for key, value in values.items():
        if isinstance(value, np.integer):
            value = int(value)
        elif isinstance(value, np.floating):
            value = float(value)
        out[key] = value
    return out


def build_initial_state(config: RunConfig, train: Dataset, test: Dataset) -> CompareState:
    """
    Construct the CompareState payload for the LangGraph run.
    """

    return {
        "config": config,
        "x_train": train.x,
        "y_train": train.y,
        "x_test": test.x,
        "y_test": test.y,
        "rows": [],
        "report": None,
    }


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    data = _load_training(config, _require(args.data, "--data", "train"))
    model_path = Path(_require(args.model, "--model", "train"))

    model = config.build_model(data.x, data.y)
    fitted = fit(model, config.fit_options())
    save_model(model_path, fitted.model, data.columns, config.data.output, data_path=Path(data.path).name)

    report = TrainReport(
        likelihood=model.lik.id,
        link=model.lik.link.name,
        engine=model.engine,
        strategy=config.fit.strategy,
        seed=config.seed,
        n_train=model.n,
        log_marginal=fitted.log_marginal,
        hyperparams=dict(zip(model.hyperparam_names, (float(v) for v in fitted.params))),
        selected=fitted.selected,
        selected_converged=fitted.selected_converged,
        optima=[OptimumRow(**c.as_dict()) for c in fitted.optima],
        diagnostics=_plain(fitted.result.diagnostics.as_dict()),
        wall_time=reported_time(fitted.wall_time),
    )
    out = Path(args.out) if args.out else model_path.with_suffix(".report.json")
    write_json_report(out, report)
    print(f"trained {model.engine} on {model.n} rows: log marginal {fitted.log_marginal:.6f}")
    if not fitted.selected_converged:
        print("warning: no optimiser start converged; the selected optimum is a stalled candidate", file=sys.stderr)
    return 0


def _prediction_frame(
    pred: PredictiveDistribution, data: Dataset, lik_discrete: bool
) -> pd.DataFrame:
    extra: Dict[str, np.ndarray] = {"pred_mean": pred.mean}
    if lik_discrete:
        extra["pred_mode"] = pred.mode
    extra.update(pred_var=pred.variance, latent_mean=pred.latent_mean, latent_var=pred.latent_var)
    if data.y is not None:
        # log predictive density per point; NLP is minus their mean
        extra["nlp_contrib"] = -nlp_contributions(pred, data.y)
    return dataset_frame(data.x, data.columns, **extra)


def cmd_predict(args: argparse.Namespace) -> int:
    loaded = load_model(_require(args.model, "--model", "predict"))
    data = load_dataset(
        _require(args.data, "--data", "predict"),
        loaded.model.lik,
        loaded.input_columns,
        loaded.output_column,
        require_output=False,
        empty_error=EmptyTestSet,
    )
    pred = predict(loaded.model, data.x)
    frame = _prediction_frame(pred, data, loaded.model.lik.discrete)
    out = _require(args.out, "--out", "predict")
    write_csv(out, frame)
    logger.info("wrote %d predictions to %s", len(frame), out)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    loaded = load_model(_require(args.model, "--model", "eval"))
    data = load_dataset(
        _require(args.data, "--data", "eval"),
        loaded.model.lik,
        loaded.input_columns,
        loaded.output_column,
        empty_error=EmptyTestSet,
    )
    metrics = evaluate(predict(loaded.model, data.x), data.y)
    report = MetricsReport(n_test=len(data), **metrics.as_dict())
    if args.out:
        write_json_report(args.out, report)
    print(report.model_dump_json(indent=2))
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    out = Path(_require(args.out, "--out", "sample"))
    lik = config.make_likelihood()
    output = config.data.output
    spec = args.grid or args.data or config.sample.grid

    if spec is None and config.sample.layout:
        layout = region_layout(
            config.sample.layout,
            lik,
            n_per_region=config.sample.n_per_region,
            n_test=config.sample.n_test,
            seed=config.seed,
        )
        write_csv(out, dataset_frame(layout.x_train, ["x"], **{output: layout.y_train, "eta": layout.eta_train}))
        test_out = out.with_name(f"{out.stem}_test{out.suffix}")
        test_frame = dataset_frame(
            layout.x_test, ["x"], **{output: layout.y_test, "eta": layout.eta_test, "region": layout.region_test}
        )
        write_csv(test_out, test_frame)
        logger.info("wrote %s layout to %s and %s", config.sample.layout, out, test_out)
        return 0

    if spec is None:
        raise ConfigError("sample needs --grid, --data or a [sample] grid/layout")
    inputs = resolve_inputs(spec, config.data.inputs)
    drawn = sample_dataset(lik, config.make_kernel(), inputs.x, config.seed)
    write_csv(out, dataset_frame(inputs.x, inputs.columns, **{output: drawn.y, "eta": drawn.eta}))
    logger.info("sampled %d rows to %s", drawn.y.size, out)
    return 0


def _compare_frame(report: CompareReport) -> pd.DataFrame:
    columns = ["engine", "status", "log_marginal", "shared_log_marginal", "MAE", "MSE", "NLP", "iterations", "wall_time", "error"]
    return pd.DataFrame([r.model_dump(include=set(columns)) for r in report.rows], columns=columns)


def cmd_compare(args: argparse.Namespace) -> int:
    from src.graph import graph

    config = _load_run_config(args)
    train = _load_training(config, _require(args.data, "--data", "compare"))
    test = train
    if config.data.test:
        test_path = Path(args.config).parent / config.data.test
        test = load_dataset(
            test_path,
            config.make_likelihood(),
            train.columns,
            config.data.output,
            empty_error=EmptyTestSet,
            clamp_unit=config.data.clamp_unit,
        )

    result_state = graph.invoke(build_initial_state(config, train, test))
    report: CompareReport = result_state["report"]
    sys.stdout.write(render_compare_table(report))
    if args.out:
        write_csv(args.out, _compare_frame(report))

    if not any(r.status == "ok" for r in report.rows):
        print("error: every engine failed", file=sys.stderr)
        return 3
    return 0


def _density_grid(pred: PredictiveDistribution) -> np.ndarray:
    """Output values for the density heat map: support points, or midpoints of an even grid."""

    lik = pred.lik
    mean, sd = pred.mean, np.sqrt(pred.variance)
    if lik.discrete:
        i = int(np.argmax(mean + sd))
        return lik.support_grid(float(mean[i]), float(pred.variance[i]))
    if lik.support == Support.UNIT:
        lo, hi = 0.0, 1.0
    elif lik.support == Support.POSITIVE:
        lo, hi = 0.0, float(np.max(mean + 8.0 * sd))
    else:
        lo, hi = float(np.min(mean - 6.0 * sd)), float(np.max(mean + 6.0 * sd))
    edges = np.linspace(lo, hi, DENSITY_POINTS + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def cmd_curve(args: argparse.Namespace) -> int:
    loaded = load_model(_require(args.model, "--model", "curve"))
    model = loaded.model
    if model.input_dim != 1:
        raise DimensionMismatch(f"curve needs a model with one input, this one has {model.input_dim}")
    grid = parse_grid(_require(args.grid, "--grid", "curve"))

    pred = predict(model, grid)
    sd = np.sqrt(pred.latent_var)
    columns: Dict[str, np.ndarray] = {
        "latent_mean": pred.latent_mean,
        "latent_lower": pred.latent_mean - 2.0 * sd,
        "latent_upper": pred.latent_mean + 2.0 * sd,
        "output_mean": pred.mean,
    }
    y_grid = _density_grid(pred)
    density = pred.density(y_grid[:, None])
    for j, value in enumerate(y_grid):
        columns[f"density[{value:.8g}]"] = density[j]
    frame = dataset_frame(grid, loaded.input_columns, **columns)
    write_csv(_require(args.out, "--out", "curve"), frame)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    data = _load_training(config, _require(args.data, "--data", "gradcheck"))
    model = config.build_model(data.x, data.y)
    negative = hyper_objective(model.engine, model.lik, model.kernel, model.x, model.y, model.options)

    def objective(params: np.ndarray):
        value, grad = negative(params)
        return -value, -grad

    check = check_gradient(objective, model.hyperparams, floor=GRADCHECK_FLOOR)
    tolerance = GRADCHECK_TOLERANCE[model.engine]
    report = GradcheckReport(
        engine=model.engine,
        likelihood=model.lik.id,
        names=model.hyperparam_names,
        point=[float(v) for v in model.hyperparams],
        analytic=[float(v) for v in check.analytic],
        numeric=[float(v) for v in check.numeric],
        relative_error=[float(v) for v in check.relative_error],
        max_relative_error=check.max_relative_error,
        tolerance=tolerance,
        passed=check.max_relative_error < tolerance,
    )
    if args.out:
        write_json_report(args.out, report)
    print(report.model_dump_json(indent=2))
    return 0 if report.passed else 3


def _rbf_index(names: List[str], suffix: str) -> int:
    for i, name in enumerate(names):
        if name.endswith(f"rbf.{suffix}"):
            return i
    raise ConfigError("surface needs a kernel with an rbf part")


def cmd_surface(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    data = _load_training(config, _require(args.data, "--data", "surface"))
    model = config.build_model(data.x, data.y)
    i = _rbf_index(model.hyperparam_names, "log_scale")
    j = _rbf_index(model.hyperparam_names, "log_bandwidth")
    axis = parse_grid(args.grid or SURFACE_GRID).ravel()
    options = dataclasses.replace(model.options, compute_grad=False)

    rows = []
    t0 = time.perf_counter()
    for a in axis:
        for b in axis:
            params = model.hyperparams.copy()
            params[i], params[j] = a, b
            try:
                value = -model.with_hyperparams(params).infer(options).log_marginal
            except GgpmError as exc:
                logger.warning("surface: %s failed at (%g, %g): %s", model.engine, a, b, exc)
                value = np.nan
            rows.append((a, b, value))
    logger.info("surface: %d points in %.2fs", len(rows), time.perf_counter() - t0)
    frame = pd.DataFrame(rows, columns=["log_scale", "log_bandwidth", "neg_log_marginal"])
    write_csv(_require(args.out, "--out", "surface"), frame)
    return 0


HANDLERS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "compare": cmd_compare,
    "curve": cmd_curve,
    "gradcheck": cmd_gradcheck,
    "surface": cmd_surface,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Generalized Gaussian process models: fit, predict and compare inference engines.",
    )
    parser.add_argument("command", choices=COMMANDS, help="Command to run.")
    parser.add_argument("--config", help="Run configuration file (see docs/CONFIG.md).")
    parser.add_argument("--data", help="CSV dataset; for sample, a CSV of inputs or a grid.")
    parser.add_argument("--model", help="Model file to write (train) or read.")
    parser.add_argument("--out", help="Output file.")
    parser.add_argument("--seed", type=int, help="Override [meta] seed.")
    parser.add_argument("--engine", choices=ENGINE_ORDER, help="Override [engine] id.")
    parser.add_argument("--grid", help="Input grid lo:hi:n.")
    parser.add_argument("--log-level", help="Logging level; defaults to GGPM_LOG_LEVEL or WARNING.")
    return parser


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return HANDLERS[args.command](args)
    except GgpmError as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
