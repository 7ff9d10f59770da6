import numpy as np
import pytest

from src.efd import make_likelihood
from src.efd.distributions import Support
from src.inference import InferenceOptions, hyper_objective, pack_hyperparams
from src.kernels import make_kernel
from src.numerics import check_gradient


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
TOLERANCE = {"taylor": 1e-4, "laplace": 1e-4, "ep": 1e-3, "kld": 1e-3}
OPTIONS = InferenceOptions(ep_tol=1e-10, ep_max_sweeps=500, kld_gtol=1e-9, kld_max_iter=5000, newton_tol=1e-12)

FAMILIES = {
    "gaussian": {"phi": 0.3},
    "gamma_shape": {"phi": 0.5},
    "gamma_scale": {"phi": 0.6},
    "inv_gaussian": {"phi": 0.4},
    "poisson": {"offset": 0.5},
    "poisson_linear": {"offset": 0.5},
    "com_poisson": {"phi": 1.3, "offset": 0.5},
    "com_poisson_linear": {"phi": 1.3, "offset": 0.5},
    "neg_binomial": {"phi": 0.5, "offset": 0.5},
    "binomial": {"trials": 4},
    "bernoulli_logit": {},
    "bernoulli_probit": {},
    "beta": {"phi": 0.2},
}

LOG_CONCAVE = ["gaussian", "gamma_shape", "poisson", "binomial", "bernoulli_logit"]
REST = [id for id in FAMILIES if id not in LOG_CONCAVE]


def create_problem(id: str):
    """Twelve points of data near the output mean of a smooth latent curve."""

    lik = make_likelihood(id, **FAMILIES[id])
    x = np.linspace(0.0, 5.0, 12)[:, None]
    s = x.ravel()
    mean, _ = lik.output_moments(0.8 * np.sin(s))
    wiggle = np.cos(3.0 * s)
    support = lik.support
    if support == Support.REAL:
        y = mean + 0.3 * wiggle
    elif support == Support.POSITIVE:
        y = mean * (1.0 + 0.3 * wiggle)
    elif support == Support.UNIT:
        y = np.clip(mean + 0.1 * wiggle, 0.05, 0.95)
    elif support == Support.COUNT:
        y = np.array([0.0, 1.0, 3.0, 2.0, 5.0, 1.0, 0.0, 2.0, 4.0, 3.0, 1.0, 2.0])
    elif lik.dist.trials == 1:
        y = np.array([0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0])
    else:
        y = np.array([0, 1, 3, 2, 4, 1, 0, 2, 4, 3, 1, 2]) / 4.0
    return lik, make_kernel("rbf", [0.0, 0.0]), x, y


def _check(engine: str, id: str):
    lik, kernel, x, y = create_problem(id)
    objective = hyper_objective(engine, lik, kernel, x, y, OPTIONS)
    check = check_gradient(objective, pack_hyperparams(lik, kernel), floor=1e-4)
    assert check.max_relative_error < TOLERANCE[engine], (engine, id, check.analytic, check.numeric)
    if not lik.has_dispersion:
        assert check.analytic[-1] == 0.0


# ---------------------------------------------------------
# Closed-form engines, whole catalog
# ---------------------------------------------------------
@pytest.mark.parametrize("id", list(FAMILIES))
def test_taylor_gradient(id):
    _check("taylor", id)


@pytest.mark.parametrize("id", list(FAMILIES))
def test_laplace_gradient(id):
    _check("laplace", id)


# ---------------------------------------------------------
# Iterative engines
# ---------------------------------------------------------
@pytest.mark.parametrize("engine", ["ep", "kld"])
@pytest.mark.parametrize("id", LOG_CONCAVE)
def test_iterative_engine_gradient(engine, id):
    _check(engine, id)


@pytest.mark.slow
@pytest.mark.parametrize("engine", ["ep", "kld"])
@pytest.mark.parametrize("id", REST)
def test_iterative_engine_gradient_full_catalog(engine, id):
    _check(engine, id)
