"""Experiment drivers: KL-versus-rank sweeps, estimation simulation studies, timing."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .cov import CovarianceParams, cov_matrix
from .diagnostics import implied_covariance, kl_divergence, mse
from .errors import DataError, GPError
from .estimate import FitSpec, fit_mle, make_objective
from .geo import generate_perturbed_grid, order_locations
from .hierarchy import ConditioningScheme, build_plan
from .likelihood import plan_loglik, simulate_field

METHODS = ("ind", "nn", "sum", "nnsum", "hlr")

FIG2_PANELS = (
    {"beta": 0.1, "nu": 0.5, "tau2": 0.15},
    {"beta": 0.5, "nu": 0.5, "tau2": 0.15},
    {"beta": 0.5, "nu": 0.5, "tau2": 0.0},
    {"beta": 0.5, "nu": 1.0, "tau2": 0.0},
    {"beta": 0.25, "nu": 0.5, "tau2": 0.0},
    {"beta": 0.25, "nu": 0.5, "tau2": 0.15},
)
FIG3_PANELS = FIG2_PANELS[:2]
PRESETS = {"fig2": (900, FIG2_PANELS), "fig3": (2500, FIG3_PANELS)}


def scheme_for(method: str, rank: int, m: int = 2, block: int = 1, r1: int | None = None) -> ConditioningScheme | None:
    """Map a method name to a scheme; ``exact`` maps to ``None``."""
    method = method.lower()
    if method == "exact":
        return None
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}; expected exact or one of {METHODS}")
    return ConditioningScheme(method.upper(), rank, m=m, r1=r1, block=block)


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# KL study
# ---------------------------------------------------------------------------


@dataclass
class KLRow:
    method: str
    rank: int
    n: int
    alpha: float
    beta: float
    nu: float
    tau2: float
    seed: int
    kl: float
    error: str = ""


def _kl_cell_block(task) -> list[KLRow]:
    n, seed, panel, alpha, ranks, methods, m = task
    locs = generate_perturbed_grid(n, seed)
    ordering = order_locations(locs)
    p = CovarianceParams(alpha, panel["beta"], panel["nu"], panel["tau2"])
    sigma_e = cov_matrix(locs, ordering, p)
    rows = []
    for method in methods:
        for r in ranks:
            row = KLRow(method, r, n, p.alpha, p.beta, p.nu, p.tau2, seed, math.nan)
            try:
                plan = build_plan(locs, ordering, scheme_for(method, r, m))
                row.kl = kl_divergence(sigma_e, implied_covariance(plan, p))
            except (GPError, np.linalg.LinAlgError) as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def kl_study(n: int, seeds, ranks, methods=METHODS, panels=FIG2_PANELS, alpha: float = 1.0,
             m: int = 2, workers: int = 1) -> list[KLRow]:
    """KL divergence at the true parameters for every (panel, seed, method, rank)."""
    if n > 2500:
        raise DataError("KL studies are dense; n must be <= 2500")
    for r in ranks:
        if not 1 <= r < n:
            raise DataError(f"rank {r} must lie in 1..{n - 1}")
    tasks = [(n, s, panel, alpha, tuple(ranks), tuple(methods), m) for panel in panels for s in seeds]
    return [row for block in _map(_kl_cell_block, tasks, workers) for row in block]


@dataclass
class TimingRow:
    method: str
    rank: int
    n: int
    run: int
    seconds: float


def timing_benchmark(sizes=(1000, 2000), rank: int = 8, method: str = "hlr", runs: int = 5,
                     seed: int = 1, params: CovarianceParams | None = None) -> list[TimingRow]:
    """Wall-clock of a full hierarchical log-likelihood evaluation (plan included).

    Locations are uniform on the unit square so any ``n`` is allowed.
    """
    from .geo import LocationSet

    params = params or CovarianceParams(1.0, 0.1, 0.5, 0.15)
    rng = np.random.default_rng(seed)
    data = {n: (LocationSet(rng.uniform(size=(n, 2))), rng.standard_normal(n)) for n in sizes}
    scheme = scheme_for(method, rank)
    rows = []
    for run in range(runs):
        for n in sizes:
            locs, z = data[n]
            t0 = time.perf_counter()
            plan_loglik(build_plan(locs, order_locations(locs), scheme), z, params)
            rows.append(TimingRow(method, rank, n, run, time.perf_counter() - t0))
    return rows


def timing_ratio(rows: list[TimingRow], small: int, large: int) -> float:
    """Median over runs of ``t(large) / t(small)``."""
    by_run: dict[int, dict[int, float]] = {}
    for r in rows:
        by_run.setdefault(r.run, {})[r.n] = r.seconds
    return float(np.median([d[large] / d[small] for d in by_run.values()]))


# ---------------------------------------------------------------------------
# simulation study
# ---------------------------------------------------------------------------


@dataclass
class SimRow:
    replicate: int
    method: str
    alpha_hat: float
    beta_hat: float
    tau2_hat: float
    loglik: float
    evals: int
    converged: bool
    error: str = ""


@dataclass
class SimSummary:
    method: str
    mse_alpha: float
    mse_beta: float
    mse_tau2: float
    used: int
    failed: int


def _sim_replicate(task) -> list[SimRow]:
    n, master, rep, rank, methods, truth, fixed, init, max_evals = task
    locs = generate_perturbed_grid(n, master)
    ordering = order_locations(locs)
    z = simulate_field(locs, ordering, truth, seed=[master, rep])
    rows = []
    for method in methods:
        spec = FitSpec(
            initial={k: v for k, v in init.items() if k not in fixed},
            fixed={k: getattr(truth, k) for k in fixed},
            scheme=scheme_for(method, rank),
            max_evals=max_evals,
        )
        try:
            res = fit_mle(z, locs, ordering, spec)
            e = res.estimates
            rows.append(SimRow(rep, method, e.alpha, e.beta, e.tau2, res.loglik, res.evaluations, res.converged))
        except (GPError, np.linalg.LinAlgError) as exc:
            rows.append(SimRow(rep, method, math.nan, math.nan, math.nan, math.nan, 0, False,
                               f"{type(exc).__name__}: {exc}"))
    return rows


def sim_study(n: int = 900, replicates: int = 500, rank: int = 2, methods=("exact", "nn", "nnsum", "hlr"),
              truth: CovarianceParams | None = None, master_seed: int = 1, fixed=("nu",),
              init: dict | None = None, max_evals: int = 2000, workers: int = 1):
    """Simulate ``replicates`` fields on one perturbed grid and fit every method.

    Fits start from the true parameters unless ``init`` is given.  Returns
    ``(rows, summaries)``; failed fits are excluded from the MSE and counted.
    """
    truth = truth or CovarianceParams(1.0, 0.1, 0.5, 0.15)
    if replicates < 1:
        raise DataError("replicates must be >= 1")
    for m in methods:
        scheme_for(m, rank)
    init = dict(init or truth.as_dict())
    tasks = [(n, master_seed, rep, rank, tuple(methods), truth, tuple(fixed), init, max_evals)
             for rep in range(replicates)]
    rows = [row for block in _map(_sim_replicate, tasks, workers) for row in block]
    return rows, summarize(rows, truth, methods)


def summarize(rows: list[SimRow], truth: CovarianceParams, methods) -> list[SimSummary]:
    out = []
    for m in methods:
        ok = [r for r in rows if r.method == m and not r.error]
        failed = sum(1 for r in rows if r.method == m and r.error)
        if ok:
            out.append(SimSummary(m, mse([r.alpha_hat for r in ok], truth.alpha),
                                  mse([r.beta_hat for r in ok], truth.beta),
                                  mse([r.tau2_hat for r in ok], truth.tau2), len(ok), failed))
        else:
            out.append(SimSummary(m, math.nan, math.nan, math.nan, 0, failed))
    return out


def as_records(rows) -> list[dict]:
    return [asdict(r) for r in rows]
