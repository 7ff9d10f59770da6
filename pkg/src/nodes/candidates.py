import logging

from src.model.fit import shared_starts
from src.state import CompareState, OptimumRow

logger = logging.getLogger(__name__)


def taylor_candidates_node(state: CompareState) -> CompareState:
    """
    Runs BEFORE the engine branches.

    Optimises the Taylor marginal from the random starts once and hands
    the top unique optima to every engine, so all four refine from the
    same candidates.
    """

    config = state["config"]
    model = config.build_model(state["x_train"], state["y_train"], engine="taylor")
    stage, starts = shared_starts(model, config.fit_options())
    logger.info("compare: %d shared starts from %d Taylor runs", len(starts), len(stage))
    return {
        "taylor_optima": [OptimumRow(**c.as_dict()) for c in stage],
        "shared_starts": [[float(v) for v in s] for s in starts],
        "shared_params": [float(v) for v in starts[0]],
    }
