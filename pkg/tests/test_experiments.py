import numpy as np
import pandas as pd
import pytest

from src.efd import make_likelihood
from src.errors import ConfigError
from src.kernels import make_kernel
from src.model import GgpmModel, evaluate, predict
from src.model.experiments import REGIONS, gap_trend, posterior_ordering, region_layout, scalar_ordering


# ---------------------------------------------------------
# Single observation
# ---------------------------------------------------------
def test_gamma_shape_ordering():
    lik = make_likelihood("gamma_shape", phi=0.5)
    for y in (0.5, 2.0):
        o = scalar_ordering(lik, y, prior_var=1.0)
        assert o.taylor < o.laplace < o.ep, y
        assert o.ep == pytest.approx(o.exact, abs=1e-3)


@pytest.mark.parametrize("y, phi, prior_var", [(0.3697, 4.079, 4.014), (0.0653, 2.769, 3.773), (0.7199, 3.971, 4.311)])
def test_gamma_shape_ordering_under_heavy_dispersion(y, phi, prior_var):
    o = scalar_ordering(make_likelihood("gamma_shape", phi=phi), y, prior_var)
    assert o.taylor < o.laplace < o.ep
    assert o.ep == pytest.approx(o.exact, abs=1e-3)

@pytest.mark.slow
def test_gamma_shape_ordering_on_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y = np.exp(rng.standard_normal())
        phi, prior_var = rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)
        o = scalar_ordering(make_likelihood("gamma_shape", phi=phi), y, prior_var)
        assert o.taylor < o.laplace < o.ep, (y, phi, prior_var)
        assert o.ep == pytest.approx(o.exact, abs=1e-3)


def test_gamma_scale_ordering_is_reversed():
    lik = make_likelihood("gamma_scale", phi=0.2)
    o = scalar_ordering(lik, 3.0, prior_var=1.0)
    assert o.taylor > o.laplace > o.ep
    assert o.ep == pytest.approx(o.exact, abs=1e-3)


# ---------------------------------------------------------
# Averaged ordering
# ---------------------------------------------------------
def test_posterior_ordering_frame():
    frame = posterior_ordering([0.2, 1.0], [1.0], n_trials=3, n_points=20, seed=1)
    assert list(frame.columns) == ["phi", "bandwidth", "la_minus_ta", "ep_minus_la", "trials", "failures"]
    assert len(frame) == 2
    assert np.all(frame["trials"] + frame["failures"] == 3)
    assert np.all(frame["la_minus_ta"] > 0)


def test_gap_trend_is_a_rank_correlation():
    frame = pd.DataFrame({"phi": [0.1, 0.5, 1.0, 2.0], "gap": [0.01, 0.02, 0.05, 0.3]})
    assert gap_trend(frame, "gap") == pytest.approx(1.0)
    frame["gap"] = frame["gap"][::-1].to_numpy()
    assert gap_trend(frame, "gap") == pytest.approx(-1.0)


@pytest.mark.slow
def test_gaps_grow_with_dispersion():
    grid = [0.1, 0.5, 1.0, 2.5, 5.0]
    frame = posterior_ordering(grid, grid, n_trials=20, seed=0)
    assert np.all(frame["la_minus_ta"] > 0)
    assert np.all(frame["ep_minus_la"] > 0)
    assert np.all(frame["failures"] == 0)
    cells = [cell for _, cell in frame.groupby("bandwidth")]
    assert np.mean([gap_trend(cell, "la_minus_ta") for cell in cells]) > 0.5
    assert np.mean([gap_trend(cell, "ep_minus_la") for cell in cells]) > 0


# ---------------------------------------------------------
# Region layouts
# ---------------------------------------------------------
def test_region_layout_shapes_and_bounds():
    layout = region_layout("extremal", n_per_region=6, n_test=50, seed=2)
    assert layout.x_train.shape == (18, 1)
    assert layout.y_train.shape == (18,)
    assert layout.x_test.shape == (50, 1)
    assert layout.eta_test.shape == (50,)
    assert np.all(layout.y_train > 0) and np.all(layout.y_test > 0)
    for r, x in zip(layout.region_test, layout.x_test.ravel()):
        lo, hi = REGIONS[r]
        assert lo <= x <= hi


def test_region_offsets_shift_the_latent():
    layout = region_layout("middle", n_per_region=4, n_test=30, trend=(0.2, 0.0), offsets=(1.0, -1.0, 0.5), seed=1)
    np.testing.assert_allclose(layout.eta_train, np.repeat([1.2, -0.8, 0.7], 4))
    np.testing.assert_allclose(layout.eta_test, 0.2 + np.array([1.0, -1.0, 0.5])[layout.region_test])


def test_region_layout_is_deterministic_per_seed():
    a = region_layout("middle", seed=5)
    b = region_layout("middle", seed=5)
    for left, right in zip(a, b):
        np.testing.assert_array_equal(left, right)


def test_layout_weights_shape_the_test_set():
    middle = region_layout("middle", n_test=2000, seed=0)
    extremal = region_layout("extremal", n_test=2000, seed=0)
    assert np.mean(middle.region_test == 1) > 0.7
    assert np.mean(extremal.region_test != 1) > 0.7


def test_unknown_layout():
    with pytest.raises(ConfigError):
        region_layout("random")


@pytest.mark.slow
def test_region_layouts_decide_between_taylor_and_ep():
    # Middle region sits below a line through the ends, so a smooth fit
    # passes above the middle points and below the end points.
    lik = make_likelihood("gamma_shape", phi=0.5)
    kernel = make_kernel("rbf", [0.0, np.log(15.0)])
    scores = {}
    for name in ("extremal", "middle"):
        totals = {"taylor": np.zeros(2), "ep": np.zeros(2)}
        for seed in range(5):
            layout = region_layout(name, lik, n_test=400, trend=(0.0, 0.0), offsets=(1.5, -1.5, 1.5), seed=seed)
            for engine in totals:
                model = GgpmModel(lik, kernel, engine, layout.x_train, layout.y_train)
                metrics = evaluate(predict(model, layout.x_test), layout.y_test)
                totals[engine] += [metrics.mae, metrics.nlp]
        scores[name] = totals

    extremal, middle = scores["extremal"], scores["middle"]
    assert extremal["ep"][0] < extremal["taylor"][0]
    assert middle["taylor"][0] < middle["ep"][0]
    assert extremal["taylor"][1] >= extremal["ep"][1]
