import numpy as np
import pytest

from src.errors import ConfigError, DimensionMismatch
from src.kernels import KernelSpec, make_kernel


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
def create_inputs(n: int = 7, d: int = 1, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 5.0, size=(n, d))


def _finite_difference_gram(spec: KernelSpec, x: np.ndarray, j: int, h: float = 1e-6) -> np.ndarray:
    params = spec.log_hyperparams
    up = params.copy()
    down = params.copy()
    up[j] += h
    down[j] -= h
    return (spec.with_log_hyperparams(up).gram(x) - spec.with_log_hyperparams(down).gram(x)) / (2 * h)


# ---------------------------------------------------------
# RBF
# ---------------------------------------------------------
def test_rbf_values_and_symmetry():
    spec = make_kernel("rbf", [np.log(2.0), np.log(0.5)], jitter=0.0)
    x = np.array([[0.0], [0.5], [3.0]])
    k = spec.gram(x)
    np.testing.assert_allclose(k, k.T)
    np.testing.assert_allclose(np.diag(k), 4.0)
    assert k[0, 1] == pytest.approx(4.0 * np.exp(-0.5))
    assert np.all(np.linalg.eigvalsh(k) > 0)


def test_jitter_only_on_the_training_gram():
    spec = make_kernel("rbf", [np.log(3.0), 0.0], jitter=1e-6)
    x = create_inputs(4)
    np.testing.assert_allclose(np.diag(spec.gram(x)), 9.0 * (1.0 + 1e-6))
    np.testing.assert_allclose(np.diag(spec.gram(x, x)), 9.0)
    np.testing.assert_allclose(spec.prior_variance(x), 9.0)


def test_gram_gradients_match_finite_differences():
    for kind, params in (("rbf", [0.3, -0.2]), ("linear", [0.1]), ("linear+rbf", [-0.4, 0.2, 0.5])):
        spec = make_kernel(kind, params)
        x = create_inputs(6, d=2, seed=1)
        grads = spec.gram_gradients(x)
        assert len(grads) == spec.n_params
        for j, g in enumerate(grads):
            np.testing.assert_allclose(g, _finite_difference_gram(spec, x, j), rtol=1e-6, atol=1e-8)


# ---------------------------------------------------------
# Composition and specs
# ---------------------------------------------------------
def test_sum_kernel_names_and_values():
    spec = make_kernel("linear+rbf", [0.0, 0.5, 0.0], jitter=0.0)
    assert spec.param_names == ["0.linear.log_scale", "1.rbf.log_scale", "1.rbf.log_bandwidth"]
    x = create_inputs(3)
    lin = make_kernel("linear", [0.0], jitter=0.0).gram(x)
    rbf = make_kernel("rbf", [0.5, 0.0], jitter=0.0).gram(x)
    np.testing.assert_allclose(spec.gram(x), lin + rbf)


def test_sum_kernel_gram_is_positive_semidefinite():
    rng = np.random.default_rng(4)
    for seed in range(20):
        params = rng.uniform(-2.0, 2.0, size=3)
        spec = make_kernel("linear+rbf", params, jitter=0.0)
        x = create_inputs(int(rng.integers(2, 30)), d=int(rng.integers(1, 4)), seed=seed)
        k = spec.gram(x)
        np.testing.assert_allclose(k, k.T)
        eig = np.linalg.eigvalsh(k)
        assert eig.min() >= -1e-10 * max(1.0, eig.max()), seed

def test_spec_dict_round_trip_keeps_parameters():
    spec = make_kernel("linear+rbf", [0.123456789, -1.5, 2.25], jitter=1e-7)
    again = KernelSpec.from_dict(spec.to_dict())
    np.testing.assert_array_equal(again.log_hyperparams, spec.log_hyperparams)
    assert again.jitter == spec.jitter


def test_kernel_errors():
    with pytest.raises(ConfigError):
        make_kernel("periodic")
    with pytest.raises(DimensionMismatch):
        make_kernel("rbf", [0.0])
    spec = make_kernel("rbf")
    with pytest.raises(DimensionMismatch):
        spec.gram(create_inputs(3, d=1), create_inputs(3, d=2))
