"""Exact and hierarchical Gaussian log-likelihoods, precision assembly, simulation."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .cov import CovarianceParams, cov_matrix, matern
from .errors import DataError, NumericError
from .geo import LocationSet, Ordering
from .hierarchy import ConditioningScheme, HierarchyPlan, StepGroup, build_plan, group_weights
from .linalg import batched_cholesky, chol_factor, chol_solve, logdet

LOG2PI = math.log(2.0 * math.pi)
DENSE_LIMIT = 5000


@dataclass
class FieldSample:
    """Observations in sequence order (``values[i]`` sits at ``locs[ordering.perm[i]]``)."""

    values: np.ndarray
    locs: LocationSet
    ordering: Ordering

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.locs.n,):
            raise DataError(f"expected {self.locs.n} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("field values must be finite")

    @classmethod
    def from_original(cls, values, locs: LocationSet, ordering: Ordering) -> "FieldSample":
        return cls(np.asarray(values, dtype=float)[ordering.perm], locs, ordering)

    def original_values(self) -> np.ndarray:
        out = np.empty_like(self.values)
        out[self.ordering.perm] = self.values
        return out


@dataclass
class HierarchyTerm:
    step: int
    targets: np.ndarray
    footprint: np.ndarray
    weights: np.ndarray
    variance: np.ndarray
    contribution: float


@dataclass
class LoglikResult:
    total: float
    terms: np.ndarray
    scheme: str
    n: int
    details: list[HierarchyTerm] | None = field(default=None, repr=False)

    @property
    def per_obs(self) -> float:
        return self.total / self.n


def _values(z) -> np.ndarray:
    return z.values if isinstance(z, FieldSample) else np.asarray(z, dtype=float)


def exact_loglik(z, sigma) -> LoglikResult:
    """``-1/2 log|S| - 1/2 z^T S^{-1} z - n/2 log(2 pi)`` by Cholesky."""
    z = _values(z)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (z.size, z.size):
        raise DataError(f"covariance {sigma.shape} does not match {z.size} observations")
    g = chol_factor(sigma)
    y = solve_triangular(g, z, lower=True, check_finite=False)
    total = -0.5 * (logdet(g) + float(y @ y) + z.size * LOG2PI)
    return LoglikResult(total, np.array([total]), "exact", z.size)


def conditional_logdensity(target, weights, footprint_values, sigma_cross, sigma_sub, target_cov):
    """Log-density of the contrast ``w = z_t - weights^T z_f``.

    Returns ``(contribution, variance)``; the variance is the exact quadratic
    form ``target_cov - x^T c - c^T x + x^T S x`` (scalar for a single target).
    """
    t = np.atleast_1d(np.asarray(target, dtype=float))
    x = np.asarray(weights, dtype=float).reshape(-1, t.size)
    zf = np.asarray(footprint_values, dtype=float).reshape(-1)
    c = np.asarray(sigma_cross, dtype=float).reshape(-1, t.size)
    s = np.asarray(sigma_sub, dtype=float).reshape(zf.size, zf.size)
    tt = np.asarray(target_cov, dtype=float).reshape(t.size, t.size)
    w = t - x.T @ zf
    xc = x.T @ c
    v = tt - xc - xc.T + x.T @ s @ x
    v = 0.5 * (v + v.T)
    if t.size == 1:
        var = float(v[0, 0])
        if not var > 0:
            raise NumericError(f"non-positive conditional variance {var}")
        return -0.5 * (w[0] ** 2 / var + math.log(var) + LOG2PI), var
    g = chol_factor(v)
    y = np.linalg.solve(g, w)
    return -0.5 * (float(y @ y) + logdet(g) + t.size * LOG2PI), v


def default_workers() -> int:
    env = os.environ.get("GP_THREADS", "0").strip() or "0"
    try:
        n = int(env)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class _GroupResult:
    weights: np.ndarray
    variance: np.ndarray
    cov: np.ndarray
    terms: np.ndarray | None
    whitened: np.ndarray | None


def _eval_group(group: StepGroup, params: CovarianceParams, rank: int, z, want_white=False) -> _GroupResult:
    cov = matern(group.dist, params)
    x = group_weights(group, cov, rank)
    k = group.k
    s = cov[:, :k, :k]
    c = cov[:, :k, k:]
    xt = np.swapaxes(x, -1, -2)
    xc = xt @ c
    v = cov[:, k:, k:] - xc - np.swapaxes(xc, -1, -2) + xt @ s @ x
    v = 0.5 * (v + np.swapaxes(v, -1, -2))
    terms = white = None
    if z is not None:
        w = z[group.targets] - np.einsum("gkb,gk->gb", x, z[group.footprints])
        b = group.b
        if b == 1:
            var = v[:, 0, 0]
            bad = ~(var > 0)
            if bad.any():
                step = int(group.steps[np.argmax(bad)])
                raise NumericError(f"non-positive conditional variance at hierarchy step {step}", step=step)
            terms = -0.5 * (w[:, 0] ** 2 / var + np.log(var) + LOG2PI)
            white = (w[:, 0] / np.sqrt(var))[:, None]
        else:
            g = batched_cholesky(v, group.steps)
            y = np.linalg.solve(g, w[:, :, None])[:, :, 0]
            ld = 2.0 * np.sum(np.log(np.diagonal(g, axis1=1, axis2=2)), axis=1)
            terms = -0.5 * (np.sum(y * y, axis=1) + ld + b * LOG2PI)
            white = y
    return _GroupResult(x, v, cov, terms, white if want_white else None)


def _eval_groups(plan: HierarchyPlan, params, z, workers: int = 1, want_white=False) -> list[_GroupResult]:
    rank = plan.scheme.rank
    if workers <= 1 or len(plan.groups) < 2:
        return [_eval_group(g, params, rank, z, want_white) for g in plan.groups]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_eval_group, g, params, rank, z, want_white) for g in plan.groups]
        return [f.result() for f in futures]


def plan_loglik(plan: HierarchyPlan, z, params: CovarianceParams, workers: int = 1, detail: bool = False) -> LoglikResult:
    """Hierarchical log-likelihood for a prebuilt plan (``z`` in sequence order)."""
    z = _values(z)
    if z.shape != (plan.n,):
        raise DataError(f"expected {plan.n} values, got shape {z.shape}")
    results = _eval_groups(plan, params, z, workers)
    terms = np.empty(len(plan.steps))
    for g, res in zip(plan.groups, results):
        terms[g.steps] = res.terms
    # fsum over the step-ordered array: exact rounding, independent of workers
    total = math.fsum(terms)
    details = None
    if detail:
        details = [None] * len(plan.steps)
        for g, res in zip(plan.groups, results):
            for i, st in enumerate(g.steps):
                var = res.variance[i]
                details[st] = HierarchyTerm(
                    int(st), g.targets[i], g.footprints[i], res.weights[i],
                    float(var[0, 0]) if g.b == 1 else var, float(res.terms[i]),
                )
    return LoglikResult(total, terms, plan.scheme.describe(), plan.n, details)


def hierarchical_loglik(z, locs: LocationSet, ordering: Ordering | None, params: CovarianceParams,
                        scheme: ConditioningScheme, workers: int = 1, detail: bool = False) -> LoglikResult:
    """Build the plan for ``scheme`` and evaluate the approximated log-likelihood.

    ``z`` is a :class:`FieldSample` or an array in sequence order.
    """
    return plan_loglik(build_plan(locs, ordering, scheme), z, params, workers, detail)


def standardized_contrasts(plan: HierarchyPlan, z, params: CovarianceParams) -> np.ndarray:
    """Whitened contrasts ``w_j / sqrt(v_j)`` laid out by target position."""
    z = _values(z)
    out = np.empty(plan.n)
    for g, res in zip(plan.groups, _eval_groups(plan, params, z, want_white=True)):
        out[g.targets.ravel()] = res.whitened.ravel()
    return out


def assemble_precision(plan: HierarchyPlan, params: CovarianceParams) -> np.ndarray:
    """Approximate precision ``sum_j B_j V_j^{-1} B_j^T`` in sequence order.

    ``B_j`` is the identity on the step's targets and minus the weights on
    its footprint; with exact conditioning the result is ``Sigma^{-1}``.
    """
    n = plan.n
    if n > DENSE_LIMIT:
        raise DataError(f"dense precision assembly limited to n <= {DENSE_LIMIT}")
    q = np.zeros((n, n))
    for g, res in zip(plan.groups, _eval_groups(plan, params, None)):
        b = g.b
        eye = np.broadcast_to(np.eye(b), (len(g.steps), b, b))
        bmat = np.concatenate([-res.weights, eye], axis=1)
        vinv = np.linalg.inv(res.variance)
        blocks = bmat @ vinv @ np.swapaxes(bmat, -1, -2)
        idx = np.concatenate([g.footprints, g.targets], axis=1)
        np.add.at(q, (idx[:, :, None], idx[:, None, :]), blocks)
    return 0.5 * (q + q.T)


def simulate_field(locs: LocationSet, ordering: Ordering | None, params: CovarianceParams, seed: int,
                   replicates: int | None = None):
    """Zero-mean Gaussian field ``G eta`` with ``G`` the Cholesky factor of the covariance.

    With ``replicates`` set, returns an ``(replicates, n)`` array of draws
    instead of a single :class:`FieldSample`.
    """
    if locs.n > DENSE_LIMIT:
        raise DataError(f"dense simulation limited to n <= {DENSE_LIMIT}")
    ordering = ordering or Ordering.identity(locs.n)
    g = chol_factor(cov_matrix(locs, ordering, params))
    rng = np.random.default_rng(seed)
    if replicates is None:
        return FieldSample(g @ rng.standard_normal(locs.n), locs, ordering)
    eta = rng.standard_normal((replicates, locs.n))
    return eta @ g.T
