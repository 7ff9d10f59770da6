import json

import numpy as np
import pandas as pd
import pytest

import main
from src.errors import NotPSD


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
GAUSSIAN = "id = gaussian\nphi = 0.2"


def create_config(tmp_path, likelihood: str = GAUSSIAN, engine: str = "taylor", extra: str = "", name: str = "run.ini"):
    path = tmp_path / name
    path.write_text(
        "[meta]\nversion = 1\nseed = 7\n\n"
        f"[likelihood]\n{likelihood}\n\n"
        "[kernel]\nkind = rbf\nlog_hyperparams = 0.0, 0.0\n\n"
        f"[engine]\nid = {engine}\n\n"
        "[fit]\nstrategy = single\n\n"
        f"{extra}\n",
        encoding="utf-8",
    )
    return path


def create_training_data(tmp_path, config, grid: str = "0:6:15", name: str = "train.csv"):
    out = tmp_path / name
    assert main.main(["sample", "--config", str(config), "--grid", grid, "--out", str(out)]) == 0
    return out


def create_trained_model(tmp_path, **kwargs):
    config = create_config(tmp_path, **kwargs)
    data = create_training_data(tmp_path, config)
    model = tmp_path / "model.json"
    assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(model)]) == 0
    return config, data, model


# ---------------------------------------------------------
# sample
# ---------------------------------------------------------
def test_sample_writes_inputs_output_and_latent(tmp_path):
    config = create_config(tmp_path)
    out = create_training_data(tmp_path, config, grid="0:10:40")
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x", "y", "eta"]
    assert len(frame) == 40
    assert frame["x"].iloc[-1] == 10.0


def test_sample_is_byte_identical_per_seed(tmp_path):
    config = create_config(tmp_path)
    a = create_training_data(tmp_path, config, name="a.csv")
    b = create_training_data(tmp_path, config, name="b.csv")
    assert a.read_bytes() == b.read_bytes()

    c = tmp_path / "c.csv"
    main.main(["sample", "--config", str(config), "--grid", "0:6:15", "--seed", "8", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_sample_layout_writes_a_test_file(tmp_path):
    config = create_config(
        tmp_path,
        likelihood="id = gamma_shape\nphi = 0.5",
        extra="[sample]\nlayout = extremal\nn_per_region = 5\nn_test = 20",
    )
    out = tmp_path / "layout.csv"
    assert main.main(["sample", "--config", str(config), "--out", str(out)]) == 0
    train = pd.read_csv(out)
    test = pd.read_csv(tmp_path / "layout_test.csv")
    assert len(train) == 15
    assert len(test) == 20
    assert "region" in test.columns
    assert np.all(train["y"] > 0)


def test_sample_without_inputs_is_a_config_error(tmp_path, capsys):
    config = create_config(tmp_path)
    assert main.main(["sample", "--config", str(config), "--out", str(tmp_path / "x.csv")]) == 2
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------
# train / predict / eval
# ---------------------------------------------------------
def test_train_writes_model_and_report(tmp_path):
    _, _, model = create_trained_model(tmp_path)
    doc = json.loads(model.read_text())
    assert doc["format"] == "ggpm-model"
    assert doc["input_columns"] == ["x"]
    report = json.loads(model.with_suffix(".report.json").read_text())
    assert report["command"] == "train"
    assert report["engine"] == "taylor"
    assert set(report["hyperparams"]) == {"rbf.log_scale", "rbf.log_bandwidth", "log_phi"}
    assert report["optima"][report["selected"]]["stage"] == "target"
    assert report["selected_converged"] is True


def test_train_is_byte_identical_without_timing(tmp_path, monkeypatch):
    monkeypatch.setenv("GGPM_REPORT_TIMING", "0")
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)
    outputs = []
    for name in ("m1", "m2"):
        model = tmp_path / f"{name}.json"
        assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(model)]) == 0
        outputs.append((model.read_bytes(), model.with_suffix(".report.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_predict_and_eval_agree_on_nlp(tmp_path):
    _, data, model = create_trained_model(tmp_path)
    pred_out = tmp_path / "pred.csv"
    metrics_out = tmp_path / "metrics.json"
    assert main.main(["predict", "--model", str(model), "--data", str(data), "--out", str(pred_out)]) == 0
    assert main.main(["eval", "--model", str(model), "--data", str(data), "--out", str(metrics_out)]) == 0

    pred = pd.read_csv(pred_out)
    assert list(pred.columns) == ["x", "pred_mean", "pred_var", "latent_mean", "latent_var", "nlp_contrib"]
    metrics = json.loads(metrics_out.read_text())
    assert metrics["n_test"] == 15
    assert metrics["NLP"] == pytest.approx(-pred["nlp_contrib"].mean(), rel=1e-12)
    assert np.all(pred["pred_var"] > pred["latent_var"])


def test_predict_without_outputs_and_counts_with_mode(tmp_path):
    _, _, model = create_trained_model(tmp_path, likelihood="id = poisson", engine="laplace")
    inputs = tmp_path / "inputs.csv"
    pd.DataFrame({"x": [0.5, 2.0, 5.5]}).to_csv(inputs, index=False)
    out = tmp_path / "pred.csv"
    assert main.main(["predict", "--model", str(model), "--data", str(inputs), "--out", str(out)]) == 0
    pred = pd.read_csv(out)
    assert "nlp_contrib" not in pred.columns
    assert np.all(pred["pred_mode"] == np.floor(pred["pred_mode"]))


def test_eval_on_an_empty_test_set(tmp_path, capsys):
    _, _, model = create_trained_model(tmp_path)
    empty = tmp_path / "empty.csv"
    empty.write_text("x,y\n")
    assert main.main(["eval", "--model", str(model), "--data", str(empty)]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------
# curve / surface / gradcheck
# ---------------------------------------------------------
def test_curve_columns(tmp_path):
    _, _, model = create_trained_model(tmp_path)
    out = tmp_path / "curve.csv"
    assert main.main(["curve", "--model", str(model), "--grid", "0:6:11", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 11
    assert list(frame.columns[:5]) == ["x", "latent_mean", "latent_lower", "latent_upper", "output_mean"]
    density = [c for c in frame.columns if c.startswith("density[")]
    assert len(density) == main.DENSITY_POINTS
    assert np.all(frame["latent_lower"] < frame["latent_upper"])
    np.testing.assert_allclose(frame["output_mean"], frame["latent_mean"], atol=1e-10)

    values = np.array([float(c[len("density[") : -1]) for c in density])
    dy = values[1] - values[0]
    np.testing.assert_allclose(frame[density].sum(axis=1) * dy, 1.0, atol=1e-3)


def test_surface_grid(tmp_path):
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)
    out = tmp_path / "surface.csv"
    args = ["surface", "--config", str(config), "--data", str(data), "--grid", "-1:1:3", "--out", str(out)]
    assert main.main(args) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["log_scale", "log_bandwidth", "neg_log_marginal"]
    assert len(frame) == 9
    assert np.all(np.isfinite(frame["neg_log_marginal"]))


def test_surface_needs_an_rbf_part(tmp_path):
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)
    linear = tmp_path / "linear.ini"
    linear.write_text(config.read_text().replace("kind = rbf\nlog_hyperparams = 0.0, 0.0", "kind = linear"))
    assert main.main(["surface", "--config", str(linear), "--data", str(data), "--out", str(tmp_path / "s.csv")]) == 2


def test_gradcheck_passes_for_taylor(tmp_path):
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)
    out = tmp_path / "grad.json"
    assert main.main(["gradcheck", "--config", str(config), "--data", str(data), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert report["names"] == ["rbf.log_scale", "rbf.log_bandwidth", "log_phi"]
    assert report["max_relative_error"] < report["tolerance"]


# ---------------------------------------------------------
# Errors and exit codes
# ---------------------------------------------------------
def test_invalid_config_exits_2(tmp_path, capsys):
    config = create_config(tmp_path, likelihood="id = student_t")
    data = tmp_path / "d.csv"
    data.write_text("x,y\n0,1\n")
    assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(tmp_path / "m.json")]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_key_reports_its_line(tmp_path, capsys):
    text = create_config(tmp_path).read_text().replace("strategy = single", "strategy = single\nrestarts = 4")
    bad = tmp_path / "bad.ini"
    bad.write_text(text)
    line = text.splitlines().index("restarts = 4") + 1
    assert main.main(["gradcheck", "--config", str(bad), "--data", str(tmp_path / "unused.csv")]) == 2
    err = capsys.readouterr().err
    assert f"bad.ini:{line}:" in err and "restarts" in err


def test_data_outside_the_support_exits_2(tmp_path, capsys):
    config = create_config(tmp_path, likelihood="id = poisson")
    data = tmp_path / "d.csv"
    data.write_text("x,y\n0,1\n1,-3\n")
    assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(tmp_path / "m.json")]) == 2
    assert "row 2" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, monkeypatch, capsys):
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)

    def broken(model, options):
        raise NotPSD("kernel matrix is not positive definite")

    monkeypatch.setattr(main, "fit", broken)
    assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(tmp_path / "m.json")]) == 3
    assert "not positive definite" in capsys.readouterr().err


def test_linear_algebra_failure_exits_3(tmp_path, monkeypatch, capsys):
    config = create_config(tmp_path)
    data = create_training_data(tmp_path, config)

    def broken(model, options):
        raise np.linalg.LinAlgError("Matrix is singular")

    monkeypatch.setattr(main, "fit", broken)
    assert main.main(["train", "--config", str(config), "--data", str(data), "--model", str(tmp_path / "m.json")]) == 3
    assert "numerical failure: Matrix is singular" in capsys.readouterr().err
