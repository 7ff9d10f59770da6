import numpy as np
import pytest
from scipy import special, stats

from src.errors import DomainError, LineSearchFailure, NotPSD
from src.numerics import (
    GaussianExpectationPlan,
    MinimizeOptions,
    check_gradient,
    discrete_expect,
    gaussian_expect,
    hermite_rule,
    inverse_digamma,
    minimize,
    polygamma,
    psd_factor,
    site_form,
    tilted_expect,
)


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
def create_spd(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def _quadratic(center: np.ndarray):
    def objective(x):
        d = x - center
        return float(d @ d), 2.0 * d

    return objective


# ---------------------------------------------------------
# Quadrature
# ---------------------------------------------------------
def test_hermite_weights_integrate_the_standard_normal():
    z, w = hermite_rule(61)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert (w @ z**2) == pytest.approx(1.0, abs=1e-12)


def test_gaussian_expect_polynomial_and_exponential():
    m = np.array([0.0, 1.5, -2.0])
    v = np.array([1.0, 0.3, 2.0])
    second = gaussian_expect(lambda eta: eta**2, m, v)
    np.testing.assert_allclose(second, m**2 + v, rtol=1e-12)

    plan = GaussianExpectationPlan(order=11, scheme="adaptive", tolerance=1e-12)
    lognormal = gaussian_expect(np.exp, m, v, plan)
    np.testing.assert_allclose(lognormal, np.exp(m + v / 2), rtol=1e-10)


def test_tilted_expect_gaussian_likelihood():
    y, s = 0.7, 1.0
    m, v = np.array([0.2]), np.array([1.0])

    def loglik(eta):
        return stats.norm.logpdf(y, loc=eta, scale=np.sqrt(s))

    log_z, mean, var, _ = tilted_expect(loglik, m, v)
    assert log_z[0] == pytest.approx(stats.norm.logpdf(y, 0.2, np.sqrt(v[0] + s)), abs=1e-8)
    assert mean[0] == pytest.approx(0.2 + v[0] / (v[0] + s) * (y - 0.2), abs=1e-8)
    assert var[0] == pytest.approx(v[0] * s / (v[0] + s), abs=1e-8)


def test_tilted_expect_finishes_when_the_hermite_rule_stalls():
    # A narrow rule on a wide exponential tilt never settles at any order.
    m, v = np.array([0.5]), np.array([4.0])
    plan = GaussianExpectationPlan().adaptive()
    log_z, mean, var, (second,) = tilted_expect(
        lambda eta: -eta, m, v, plan, center=m - v, spread=np.array([0.01]), extras=[lambda eta: eta**2]
    )
    assert log_z[0] == pytest.approx(-0.5 + 2.0, rel=1e-8)
    assert mean[0] == pytest.approx(0.5 - 4.0, rel=1e-8)
    assert var[0] == pytest.approx(4.0, rel=1e-7)
    assert second[0] == pytest.approx(4.0 + 3.5**2, rel=1e-7)

def test_discrete_expect_poisson_mean():
    rate = 4.2

    def log_weight(n):
        return n * np.log(rate) - rate - special.gammaln(n + 1.0)

    assert discrete_expect(lambda n: n, log_weight, mode=rate, var=rate) == pytest.approx(rate, rel=1e-10)


# ---------------------------------------------------------
# Special functions
# ---------------------------------------------------------
def test_polygamma_orders_and_domain():
    x = np.array([0.3, 1.0, 7.5])
    np.testing.assert_allclose(polygamma(0, x), special.digamma(x))
    np.testing.assert_allclose(polygamma(1, x), special.polygamma(1, x))
    np.testing.assert_allclose(polygamma(2, x), special.polygamma(2, x))
    with pytest.raises(DomainError):
        polygamma(0, np.array([-1.0]))
    with pytest.raises(DomainError):
        polygamma(3, x)


def test_inverse_digamma_round_trip():
    x = np.array([0.01, 0.5, 3.0, 100.0])
    np.testing.assert_allclose(inverse_digamma(special.digamma(x)), x, rtol=1e-10)


# ---------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------
def test_psd_factor_logdet_and_solve():
    a = create_spd(5)
    fac = psd_factor(a)
    assert fac.jitter == 0.0
    assert fac.logdet == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)
    b = np.arange(5.0)
    np.testing.assert_allclose(a @ fac.solve(b), b, atol=1e-10)


def test_psd_factor_jitter_escalation():
    singular = np.ones((3, 3))
    fac = psd_factor(singular)
    assert fac.jitter > 0

    with pytest.raises(NotPSD):
        psd_factor(np.diag([1.0, -1.0]))
    with pytest.raises(NotPSD):
        psd_factor(singular, allow_jitter=False)


def test_site_form_matches_direct_inverse():
    k = create_spd(4, seed=1)
    precision = np.array([0.5, 2.0, 0.0, 1.0])
    form = site_form(k, precision)
    expected = np.linalg.inv(np.linalg.inv(k) + np.diag(precision))
    np.testing.assert_allclose(form.cov, expected, atol=1e-10)
    assert form.logdet == pytest.approx(np.linalg.slogdet(np.eye(4) + k @ np.diag(precision))[1], rel=1e-10)

    vacuous = site_form(k, np.zeros(4))
    np.testing.assert_allclose(vacuous.cov, k, atol=1e-12)


# ---------------------------------------------------------
# Optimiser and gradient check
# ---------------------------------------------------------
def test_minimize_quadratic_records_a_monotone_trace():
    center = np.array([1.0, -2.0, 0.5])
    x, trace = minimize(_quadratic(center), np.zeros(3), MinimizeOptions(gtol=1e-8))
    np.testing.assert_allclose(x, center, atol=1e-6)
    assert trace.converged
    assert trace.status == "converged"
    assert all(b <= a for a, b in zip(trace.values, trace.values[1:]))
    assert trace.values[-1] == pytest.approx(0.0, abs=1e-10)


def test_minimize_trace_holds_the_accepted_objective_values():
    def rosenbrock(x):
        f = 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
        g = np.array([-400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] ** 2)])
        return float(f), g

    x0 = np.array([-1.2, 1.0])
    x, trace = minimize(rosenbrock, x0, MinimizeOptions(gtol=1e-8))
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-4)
    assert trace.values[0] == rosenbrock(x0)[0]
    assert trace.values[-1] == pytest.approx(rosenbrock(x)[0], abs=1e-12)
    assert trace.iterations >= 10
    assert all(b <= a for a, b in zip(trace.values, trace.values[1:]))


def test_minimize_respects_bounds():
    center = np.array([5.0, 0.0])
    x, _ = minimize(_quadratic(center), np.zeros(2), MinimizeOptions(bounds=[(-1.0, 1.0), (-1.0, 1.0)]))
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-6)


def test_minimize_rejects_a_non_finite_start():
    def objective(x):
        return float("nan"), np.zeros_like(x)

    with pytest.raises(LineSearchFailure) as info:
        minimize(objective, np.zeros(2))
    assert info.value.x is not None


def test_check_gradient_on_a_known_function():
    def objective(x):
        return float(np.sum(np.sin(x)) + x @ x), np.cos(x) + 2.0 * x

    check = check_gradient(objective, np.array([0.3, -1.2, 2.0]))
    assert check.max_relative_error < 1e-7

    def wrong(x):
        return float(x @ x), x

    assert check_gradient(wrong, np.array([1.0, 2.0])).max_relative_error > 0.4
