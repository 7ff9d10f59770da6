import numpy as np
import pandas as pd

import main
from src.efd import make_likelihood
from src.errors import NotPSD
from src.graph import graph
from src.inference import ENGINE_ORDER
from src.kernels import make_kernel
from src.model import sample_dataset
from src.nodes import engines as engine_nodes
from src.tools.config_tools import parse_config_text
from src.tools.dataset_tools import Dataset


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
CONFIG = """
[meta]
version = 1
seed = 3

[likelihood]
id = gaussian
phi = 0.2

[kernel]
kind = rbf
log_hyperparams = 0.0, 0.0

[fit]
strategy = taylor_init
n_random = 3
top_k = 1
"""


def create_state():
    config = parse_config_text(CONFIG)
    x = np.linspace(0.0, 6.0, 15)[:, None]
    y = sample_dataset(make_likelihood("gaussian", phi=0.2), make_kernel("rbf"), x, seed=3).y
    train = Dataset(x, y, ["x"])
    return main.build_initial_state(config, train, train)


def _failing_for(engine: str, error=NotPSD):
    original = engine_nodes.refine

    def refine(model, starts, options, *args, **kwargs):
        if engine in ("*", model.engine):
            raise error(f"{model.engine}: injected failure")
        return original(model, starts, options, *args, **kwargs)

    return refine


# ---------------------------------------------------------
# Graph
# ---------------------------------------------------------
def test_all_engines_agree_on_gaussian_data():
    report = graph.invoke(create_state())["report"]
    assert [r.engine for r in report.rows] == list(ENGINE_ORDER)
    assert all(r.status == "ok" for r in report.rows)

    marginals = [r.log_marginal for r in report.rows]
    assert max(marginals) - min(marginals) < 1e-3
    shared = [r.shared_log_marginal for r in report.rows]
    assert max(shared) - min(shared) < 1e-5
    nlps = [r.NLP for r in report.rows]
    assert max(nlps) - min(nlps) < 1e-3
    assert report.n_train == 15


def test_failed_engine_becomes_a_row(monkeypatch):
    monkeypatch.setattr(engine_nodes, "refine", _failing_for("ep"))
    report = graph.invoke(create_state())["report"]
    rows = {r.engine: r for r in report.rows}
    assert rows["ep"].status == "failed"
    assert "injected failure" in rows["ep"].error
    assert rows["ep"].log_marginal is None
    assert all(rows[e].status == "ok" for e in ("taylor", "laplace", "kld"))
    assert [r.engine for r in report.rows] == list(ENGINE_ORDER)


def test_library_linear_algebra_error_becomes_a_failed_row(monkeypatch):
    monkeypatch.setattr(engine_nodes, "refine", _failing_for("laplace", error=np.linalg.LinAlgError))
    report = graph.invoke(create_state())["report"]
    rows = {r.engine: r for r in report.rows}
    assert rows["laplace"].status == "failed"
    assert "injected failure" in rows["laplace"].error
    assert all(rows[e].status == "ok" for e in ("taylor", "ep", "kld"))
    assert all(rows[e].converged for e in ("taylor", "ep", "kld"))


# ---------------------------------------------------------
# CLI
# ---------------------------------------------------------
def test_compare_command_writes_the_table(tmp_path, capsys):
    config = tmp_path / "run.ini"
    config.write_text(CONFIG, encoding="utf-8")
    data = tmp_path / "train.csv"
    assert main.main(["sample", "--config", str(config), "--grid", "0:6:15", "--out", str(data)]) == 0
    out = tmp_path / "compare.csv"
    assert main.main(["compare", "--config", str(config), "--data", str(data), "--out", str(out)]) == 0

    table = capsys.readouterr().out
    assert table.splitlines()[0].split()[:2] == ["engine", "status"]
    frame = pd.read_csv(out)
    assert list(frame["engine"]) == list(ENGINE_ORDER)
    assert set(frame["status"]) == {"ok"}


def test_compare_exits_3_when_every_engine_fails(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(engine_nodes, "refine", _failing_for("*"))
    config = tmp_path / "run.ini"
    config.write_text(CONFIG, encoding="utf-8")
    data = tmp_path / "train.csv"
    main.main(["sample", "--config", str(config), "--grid", "0:6:15", "--out", str(data)])
    assert main.main(["compare", "--config", str(config), "--data", str(data)]) == 3
    assert "every engine failed" in capsys.readouterr().err
