from src.numerics.gradcheck import GradientCheck, check_gradient
from src.numerics.linalg import PsdFactor, SiteForm, psd_factor, psd_logdet, psd_solve, site_form
from src.numerics.optimize import MinimizeOptions, OptimizeTrace, minimize
from src.numerics.quadrature import (
    GaussianExpectationPlan,
    discrete_expect,
    gaussian_expect,
    hermite_rule,
    tilted_expect,
)
from src.numerics.special import inverse_digamma, polygamma, solve_increasing

__all__ = [
    "GaussianExpectationPlan",
    "GradientCheck",
    "MinimizeOptions",
    "OptimizeTrace",
    "PsdFactor",
    "SiteForm",
    "check_gradient",
    "discrete_expect",
    "gaussian_expect",
    "hermite_rule",
    "inverse_digamma",
    "minimize",
    "polygamma",
    "psd_factor",
    "psd_logdet",
    "psd_solve",
    "site_form",
    "solve_increasing",
    "tilted_expect",
]
