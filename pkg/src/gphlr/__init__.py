"""Hierarchical low-rank and nearest-neighbor approximations of Gaussian-process likelihoods."""

from .cov import CovarianceParams, cov_matrix, cross_cov, matern
from .bessel import bessel_k
from .diagnostics import empirical_variogram, frobenius_gap_check, implied_covariance, kl_divergence, mse
from .errors import DataError, DefinitenessError, GPError, NumericError
from .estimate import EstimationResult, FitSpec, fit_mle, loglik_profile
from .geo import (
    AxisScale, Location, LocationSet, Ordering, distance, generate_perturbed_grid,
    nearest_past_neighbors, order_locations,
)
from .hierarchy import (
    ConditioningScheme, HierarchyPlan, LowRankFactor, Selector, approx_weights, build_hlr_factor,
    build_plan, build_selector,
)
from .likelihood import (
    FieldSample, LoglikResult, assemble_precision, conditional_logdensity, exact_loglik,
    hierarchical_loglik, plan_loglik, simulate_field,
)

__version__ = "0.1.0"
