from src.inference.engines import ENGINE_ORDER
from src.state import CompareReport, CompareState


def tabulate_node(state: CompareState) -> CompareState:
    """
    Synchronization node that runs AFTER all engine branches.

    The rows reducer has already merged the branches; rows arrive in
    completion order, so they are put back into engine order here.
    """

    rows = sorted(state.get("rows", []), key=lambda r: ENGINE_ORDER.index(r.engine))
    report = CompareReport(
        likelihood=state["config"].likelihood.id,
        seed=state["config"].seed,
        n_train=int(state["y_train"].size),
        n_test=int(state["y_test"].size),
        shared_params=state["shared_params"],
        rows=rows,
    )
    return {"report": report}
