import json

import numpy as np
import pytest
from scipy import integrate, stats

from src.efd import make_likelihood
from src.errors import AllStartsFailed, ConfigError, DataError, DimensionMismatch, DomainError, EmptyTestSet, SchemaMismatch
from src.kernels import make_kernel
from src.model import FitOptions, GgpmModel, evaluate, fit, load_model, predict, sample_dataset, save_model
from src.model.fit import Candidate, select_optimum, unique_optima


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
def create_model(id: str = "gaussian", engine: str = "taylor", n: int = 15, seed: int = 0, **kwargs) -> GgpmModel:
    lik = make_likelihood(id, **kwargs)
    kernel = make_kernel("rbf", [0.0, 0.0])
    x = np.linspace(0.0, 6.0, n)[:, None]
    data = sample_dataset(lik, kernel, x, seed)
    return GgpmModel(lik, kernel, engine, x, data.y)


def create_candidate(params, log_marginal, stage="target", converged=True) -> Candidate:
    params = np.asarray(params, dtype=float)
    return Candidate(
        engine="ep", stage=stage, start=params, params=params, log_marginal=log_marginal, converged=converged
    )


# ---------------------------------------------------------
# Model construction
# ---------------------------------------------------------
def test_model_validation():
    lik = make_likelihood("poisson")
    kernel = make_kernel("rbf")
    x = np.zeros((3, 1))
    with pytest.raises(ConfigError):
        GgpmModel(lik, kernel, "mcmc", x, np.ones(3))
    with pytest.raises(DimensionMismatch):
        GgpmModel(lik, kernel, "ep", x, np.ones(4))
    with pytest.raises(DataError):
        GgpmModel(lik, kernel, "ep", x, np.array([1.0, np.nan, 2.0]))
    with pytest.raises(DomainError):
        GgpmModel(lik, kernel, "ep", x, np.array([1.0, -2.0, 2.0]))


def test_hyperparams_pack_the_dispersion_last():
    model = create_model("gamma_shape", phi=0.5)
    assert model.hyperparam_names == ["rbf.log_scale", "rbf.log_bandwidth", "log_phi"]
    assert model.hyperparams[-1] == pytest.approx(np.log(0.5))
    moved = model.with_hyperparams([0.1, 0.2, np.log(2.0)])
    assert moved.lik.phi == pytest.approx(2.0)
    assert moved.kernel.log_hyperparams[0] == pytest.approx(0.1)


# ---------------------------------------------------------
# Fitting
# ---------------------------------------------------------
def test_single_start_fit_improves_the_marginal():
    model = create_model(phi=0.2)
    before = model.infer().log_marginal
    result = fit(model, FitOptions(strategy="single"))
    assert result.log_marginal >= before - 1e-9
    assert result.best.converged
    assert result.log_marginal == pytest.approx(result.best.log_marginal, abs=1e-6)


def test_taylor_init_hands_unique_optima_to_the_engine():
    model = create_model("poisson", engine="laplace", n=12, seed=3, offset=0.5)
    result = fit(model, FitOptions(strategy="taylor_init", n_random=4, top_k=2, seed=1))
    stages = [c.stage for c in result.optima]
    assert stages.count("taylor") == 4
    assert 1 <= stages.count("target") <= 2
    assert result.best.stage == "target"
    assert result.model.hyperparams[-1] == 0.0


def test_unique_optima_drops_near_duplicates():
    cands = [
        create_candidate([0.0, 0.0], -5.0, stage="taylor"),
        create_candidate([0.01, 0.0], -4.9, stage="taylor"),
        create_candidate([2.0, 1.0], -7.0, stage="taylor"),
        Candidate(engine="taylor", stage="taylor", start=np.zeros(2), status="failed"),
    ]
    kept = unique_optima(cands, top_k=3, threshold=0.05)
    assert [c.log_marginal for c in kept] == [-4.9, -7.0]


def test_select_optimum_prefers_converged_candidates():
    cands = [
        create_candidate([0.0], -1.0, converged=False),
        create_candidate([1.0], -3.0),
        create_candidate([2.0], -2.0),
        create_candidate([3.0], 5.0, stage="taylor"),
    ]
    assert select_optimum(cands) == 2

    failed = [Candidate(engine="ep", stage="target", start=np.zeros(2), status="failed")]
    with pytest.raises(AllStartsFailed):
        select_optimum(failed)


def test_stalled_fallback_is_flagged_on_the_fit(caplog):
    stalled = [create_candidate([0.0], -4.0, converged=False), create_candidate([1.0], -2.0, converged=False)]
    with caplog.at_level("WARNING"):
        assert select_optimum(stalled) == 1
    assert "no optimiser start converged" in caplog.text

    model = create_model("poisson", n=12)
    result = fit(model, FitOptions(strategy="single", max_iter=1, gtol=1e-12))
    assert not result.best.converged
    assert result.selected_converged is False

    converged = fit(create_model(phi=0.2), FitOptions(strategy="single"))
    assert converged.selected_converged is True


# ---------------------------------------------------------
# Prediction and metrics
# ---------------------------------------------------------
def test_gaussian_predictive_is_latent_plus_noise():
    model = create_model(phi=0.3)
    x_star = np.array([[0.5], [2.5], [7.0]])
    pred = predict(model, x_star)
    np.testing.assert_allclose(pred.mean, pred.latent_mean, atol=1e-10)
    np.testing.assert_allclose(pred.variance, pred.latent_var + 0.3, rtol=1e-8)
    assert pred.mode is None

    y = np.array([0.1, -0.4, 0.9])
    metrics = evaluate(pred, y)
    expected = -stats.norm.logpdf(y, pred.latent_mean, np.sqrt(pred.latent_var + 0.3))
    assert metrics.nlp == pytest.approx(float(np.mean(expected)), rel=1e-6)
    assert metrics.mse == pytest.approx(float(np.mean((pred.latent_mean - y) ** 2)))


def test_count_predictions_use_the_mode():
    model = create_model("poisson", engine="laplace", n=10, seed=2, offset=0.5)
    pred = predict(model, np.array([[1.0], [4.0]]))
    point = pred.point
    assert np.all(point == np.floor(point))
    np.testing.assert_array_equal(point, pred.mode)


def test_empty_and_misaligned_test_sets():
    model = create_model(n=8)
    pred = predict(model, np.array([[1.0], [2.0]]))
    with pytest.raises(EmptyTestSet):
        evaluate(predict(model, np.zeros((0, 1))), np.array([]))
    with pytest.raises(DimensionMismatch):
        evaluate(pred, np.zeros(3))


# ---------------------------------------------------------
# Model files
# ---------------------------------------------------------
def test_save_and_load_keep_parameters_bit_exact(tmp_path):
    model = create_model("gamma_shape", engine="ep", n=9, phi=0.37).with_hyperparams([0.123456789, -0.3, np.log(0.37)])
    path = save_model(tmp_path / "model.json", model, ["x"])
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.model.hyperparams, model.hyperparams)
    np.testing.assert_array_equal(loaded.model.x, model.x)
    np.testing.assert_array_equal(loaded.model.y, model.y)
    assert loaded.model.options == model.options
    assert loaded.input_columns == ["x"]
    assert loaded.model.infer().log_marginal == model.infer().log_marginal


def test_unknown_model_version_is_rejected(tmp_path):
    model = create_model(n=5)
    path = save_model(tmp_path / "model.json", model, ["x"])
    raw = json.loads(path.read_text())
    raw["version"] = 99
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaMismatch):
        load_model(path)

    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    with pytest.raises(SchemaMismatch):
        load_model(bad)


# ---------------------------------------------------------
# Sampling
# ---------------------------------------------------------
def test_sampling_is_deterministic_per_seed():
    lik = make_likelihood("neg_binomial", phi=0.5)
    kernel = make_kernel("rbf")
    x = np.linspace(0.0, 10.0, 40)[:, None]
    a = sample_dataset(lik, kernel, x, seed=7)
    b = sample_dataset(lik, kernel, x, seed=7)
    c = sample_dataset(lik, kernel, x, seed=8)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.eta, b.eta)
    assert not np.array_equal(a.eta, c.eta)
    assert np.all(a.y >= 0) and np.all(a.y == np.floor(a.y))


# ---------------------------------------------------------
# Predictive oracles
# ---------------------------------------------------------
def test_poisson_output_mean_is_lognormal():
    model = create_model("poisson", engine="ep", n=10, seed=4)
    pred = predict(model, np.array([[0.7], [3.3], [9.0]]))
    np.testing.assert_allclose(pred.mean, np.exp(pred.latent_mean + pred.latent_var / 2), rtol=1e-8)


def test_poisson_nlp_matches_the_pmf():
    model = create_model("poisson", engine="laplace", n=10, seed=5)
    pred = predict(model, np.array([[1.0], [2.0], [4.5]]))
    y = np.array([0.0, 2.0, 5.0])
    eta = np.linspace(-15.0, 15.0, 600_001)
    expected = []
    for yi, m, v in zip(y, pred.latent_mean, pred.latent_var):
        integrand = stats.poisson.pmf(yi, np.exp(eta)) * stats.norm.pdf(eta, m, np.sqrt(v))
        expected.append(-np.log(integrate.trapezoid(integrand, eta)))
    assert evaluate(pred, y).nlp == pytest.approx(float(np.mean(expected)), abs=1e-7)


def test_beta_density_is_normalised_far_from_data():
    model = create_model("beta", engine="ep", n=10, seed=6, phi=0.2)
    pred = predict(model, np.array([[30.0]]))
    mass, _ = integrate.quad(lambda y: float(pred.density(np.array([[y]]))[0, 0]), 0.0, 1.0, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_single_start_from_an_optimum_stays_put():
    first = fit(create_model(phi=0.2, seed=9), FitOptions(strategy="single", gtol=1e-8))
    again = fit(first.model, FitOptions(strategy="single", gtol=1e-5))
    np.testing.assert_allclose(again.params, first.params, atol=1e-3)
    assert again.log_marginal == pytest.approx(first.log_marginal, abs=1e-6)


# ---------------------------------------------------------
# Statistical checks
# ---------------------------------------------------------
@pytest.mark.slow
def test_gaussian_noise_is_recovered():
    for seed in range(10):
        model = create_model(n=200, seed=seed, phi=0.25)
        result = fit(model, FitOptions(strategy="single"))
        assert 0.7 * 0.25 <= result.model.lik.phi <= 1.3 * 0.25, seed


@pytest.mark.slow
def test_taylor_init_saves_engine_iterations():
    for seed in range(10):
        model = create_model("gamma_shape", engine="ep", n=20, seed=seed, phi=0.5)
        shortcut = fit(model, FitOptions(strategy="taylor_init", n_random=50, top_k=3, seed=seed))
        baseline = fit(model, FitOptions(strategy="random_multistart", n_random=50, seed=seed))
        assert shortcut.log_marginal >= baseline.log_marginal - 0.1, seed
        assert 5 * shortcut.target_iterations <= baseline.target_iterations, seed
        assert all(c.status != "failed" for c in shortcut.optima if c.stage == "target"), seed
