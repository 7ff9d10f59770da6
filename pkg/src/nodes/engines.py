import logging
import time
from typing import Callable, Optional

import numpy as np

from src.errors import NUMERICAL_FAILURES
from src.model.fit import refine
from src.model.metrics import evaluate
from src.model.predict import predict
from src.state import CompareRow, CompareState
from src.tools.report_tools import reported_time

logger = logging.getLogger(__name__)


def _shared_log_marginal(state: CompareState, engine: str) -> Optional[float]:
    """The engine's marginal at the Taylor-selected candidate, without refinement."""

    config = state["config"]
    try:
        model = config.build_model(state["x_train"], state["y_train"], engine)
        return float(model.with_hyperparams(state["shared_params"]).infer().log_marginal)
    except NUMERICAL_FAILURES as exc:
        logger.warning("compare: %s failed at the shared candidate: %s", engine, exc)
        return None


def make_engine_node(engine: str) -> Callable[[CompareState], CompareState]:
    """One branch of the fan-out: refine, predict and score a single engine."""

    def node(state: CompareState) -> CompareState:
        config = state["config"]
        t0 = time.perf_counter()
        try:
            model = config.build_model(state["x_train"], state["y_train"], engine)
            starts = [np.asarray(s, dtype=float) for s in state["shared_starts"]]
            fitted = refine(model, starts, config.fit_options())
            metrics = evaluate(predict(fitted.model, state["x_test"], fitted.result), state["y_test"])
            row = CompareRow(
                engine=engine,
                log_marginal=fitted.log_marginal,
                shared_log_marginal=_shared_log_marginal(state, engine),
                MAE=metrics.mae,
                MSE=metrics.mse,
                NLP=metrics.nlp,
                iterations=fitted.target_iterations,
                converged=fitted.selected_converged,
                hyperparams=dict(zip(model.hyperparam_names, (float(v) for v in fitted.params))),
                wall_time=reported_time(time.perf_counter() - t0),
            )
        except NUMERICAL_FAILURES as exc:
            logger.warning("compare: engine %s failed: %s", engine, exc)
            row = CompareRow(
                engine=engine, status="failed", error=str(exc), wall_time=reported_time(time.perf_counter() - t0)
            )
        return {"rows": [row]}

    node.__name__ = f"{engine}_engine_node"
    return node
