"""Maximum-likelihood estimation of Matérn parameters with Nelder-Mead."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cov import NU_MAX, CovarianceParams, matern_correlation
from .errors import DataError, GPError, NumericError
from .geo import LocationSet, Ordering, pairwise_distances
from .hierarchy import ConditioningScheme, build_plan
from .likelihood import LOG2PI, FieldSample, plan_loglik
from .linalg import chol_factor, logdet

PARAM_NAMES = ("alpha", "beta", "nu", "tau2")
TAU2_SHIFT = 1e-12
NU_MIN = 0.05


@dataclass
class FitSpec:
    """What to estimate and how.

    ``scheme=None`` maximizes the exact likelihood.  ``initial`` must give a
    value for every free parameter; ``fixed`` for every other one.
    """

    initial: dict[str, float]
    fixed: dict[str, float] = field(default_factory=dict)
    scheme: ConditioningScheme | None = None
    max_evals: int = 2000
    tol: float = 1e-6
    step: float = 0.25

    def __post_init__(self):
        unknown = (set(self.initial) | set(self.fixed)) - set(PARAM_NAMES)
        if unknown:
            raise DataError(f"unknown parameters {sorted(unknown)}")
        both = set(self.initial) & set(self.fixed)
        if both:
            raise DataError(f"parameters both free and fixed: {sorted(both)}")
        missing = set(PARAM_NAMES) - set(self.initial) - set(self.fixed)
        if missing:
            raise DataError(f"parameters neither free nor fixed: {sorted(missing)}")
        # validates positivity of the starting point
        CovarianceParams(**{**self.fixed, **self.initial})
        if self.max_evals < 1 or not self.tol > 0:
            raise DataError("max_evals must be >= 1 and tol > 0")

    @property
    def free(self) -> tuple[str, ...]:
        return tuple(p for p in PARAM_NAMES if p in self.initial)

    def params(self, values: dict[str, float]) -> CovarianceParams:
        return CovarianceParams(**{**self.fixed, **values})


@dataclass
class EstimationResult:
    estimates: CovarianceParams
    loglik: float
    evaluations: int
    converged: bool
    trace: list[tuple[CovarianceParams, float]] = field(repr=False, default_factory=list)


def _to_internal(name: str, value: float) -> float:
    return math.log(value + TAU2_SHIFT) if name == "tau2" else math.log(value)


def _from_internal(name: str, t: float) -> float:
    v = math.exp(t)
    return max(v - TAU2_SHIFT, 0.0) if name == "tau2" else v


class ExactObjective:
    """Exact log-likelihood with the distance matrix cached."""

    def __init__(self, z: np.ndarray, locs: LocationSet, ordering: Ordering):
        self.z = np.asarray(z, dtype=float)
        pts = locs.scaled[ordering.perm]
        self.dist = pairwise_distances(pts, pts)
        self.n = self.z.size

    def __call__(self, p: CovarianceParams) -> float:
        c = p.alpha * matern_correlation(self.dist, p.beta, p.nu)
        c[np.diag_indices_from(c)] = p.alpha + p.tau2
        g = chol_factor(c)
        from scipy.linalg import solve_triangular

        y = solve_triangular(g, self.z, lower=True, check_finite=False)
        return -0.5 * (logdet(g) + float(y @ y) + self.n * LOG2PI)


class HierarchicalObjective:
    """Approximated log-likelihood with the conditioning plan built once."""

    def __init__(self, z, locs: LocationSet, ordering: Ordering, scheme: ConditioningScheme, workers: int = 1):
        self.z = np.asarray(z, dtype=float)
        self.plan = build_plan(locs, ordering, scheme)
        self.workers = workers

    def __call__(self, p: CovarianceParams) -> float:
        return plan_loglik(self.plan, self.z, p, self.workers).total


def make_objective(z, locs: LocationSet, ordering: Ordering | None, scheme: ConditioningScheme | None, workers: int = 1):
    ordering = ordering or Ordering.identity(locs.n)
    values = z.values if isinstance(z, FieldSample) else np.asarray(z, dtype=float)
    if values.shape != (locs.n,) or not np.all(np.isfinite(values)):
        raise DataError("data must be finite and match the locations")
    if scheme is None:
        return ExactObjective(values, locs, ordering)
    return HierarchicalObjective(values, locs, ordering, scheme, workers)


def fit_mle(z, locs: LocationSet, ordering: Ordering | None, spec: FitSpec, workers: int = 1,
            objective=None) -> EstimationResult:
    """Maximize the (approximated) log-likelihood over the free parameters.

    Nelder-Mead runs on log-transformed parameters (``log(tau2 + 1e-12)`` for
    the nugget) so every trial point is admissible; ``nu`` is additionally
    confined to ``[0.05, 5]``.  Failures at trial points count as rejected
    moves, a failure at the starting point is an error.
    """
    f = objective or make_objective(z, locs, ordering, spec.scheme, workers)
    names = spec.free
    trace: list[tuple[CovarianceParams, float]] = []

    def decode(t) -> dict[str, float]:
        return {nm: _from_internal(nm, float(v)) for nm, v in zip(names, t)}

    def negll(t):
        vals = decode(t)
        if "nu" in vals and not NU_MIN <= vals["nu"] <= NU_MAX:
            return math.inf
        try:
            p = spec.params(vals)
            ll = f(p)
        except (GPError, np.linalg.LinAlgError, FloatingPointError, OverflowError):
            return math.inf
        if not math.isfinite(ll):
            return math.inf
        trace.append((p, ll))
        return -ll

    x0 = np.array([_to_internal(nm, spec.initial[nm]) for nm in names])
    p0 = spec.params(spec.initial)
    try:
        ll0 = f(p0)
    except (GPError, np.linalg.LinAlgError) as exc:
        raise NumericError(f"objective failed at the initial point: {exc}") from exc
    if not math.isfinite(ll0):
        raise NumericError("objective is not finite at the initial point")
    if not names:
        return EstimationResult(p0, ll0, 1, True, [(p0, ll0)])

    simplex = np.vstack([x0, x0 + spec.step * np.eye(len(names))])
    with np.errstate(all="ignore"):
        res = minimize(
            negll, x0, method="Nelder-Mead",
            options=dict(initial_simplex=simplex, maxfev=spec.max_evals, xatol=np.inf,
                         fatol=spec.tol, adaptive=False),
        )
    fsim = res.final_simplex[1]
    spread = float(np.max(fsim) - np.min(fsim)) if np.all(np.isfinite(fsim)) else math.inf
    best = spec.params(decode(res.final_simplex[0][0]))
    best_ll = -float(fsim[0])
    if best_ll < ll0:
        best, best_ll = p0, ll0
    return EstimationResult(best, best_ll, int(res.nfev), spread < spec.tol, trace)


@dataclass(frozen=True)
class ProfileCell:
    value: float
    loglik: float
    error: str | None = None


def loglik_profile(z, locs: LocationSet, ordering: Ordering | None, scheme: ConditioningScheme | None,
                   name: str, grid, base: CovarianceParams) -> list[ProfileCell]:
    """Objective on a one-parameter grid with the others held at ``base``."""
    if name not in PARAM_NAMES:
        raise DataError(f"unknown parameter {name!r}")
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise DataError("profile grid is empty")
    f = make_objective(z, locs, ordering, scheme)
    out = []
    for g in grid:
        try:
            out.append(ProfileCell(g, f(base.replace(**{name: g}))))
        except GPError as exc:
            out.append(ProfileCell(g, math.nan, str(exc)))
    return out
