"""Approximation diagnostics: KL divergence, Frobenius gap, variograms, MSE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cov import CovarianceParams
from .errors import DataError, NumericError
from .geo import LocationSet
from .hierarchy import HierarchyPlan, build_hlr_factor
from .likelihood import assemble_precision
from .linalg import chol_factor, chol_inverse, frobenius_norm, logdet, sym_eigen

KL_DENSE_LIMIT = 2500
KL_FLOOR = -1e-9


@dataclass(frozen=True)
class KLReport:
    scheme: str
    rank: int
    n: int
    params: CovarianceParams
    kl: float


def implied_covariance(plan: HierarchyPlan, params: CovarianceParams) -> np.ndarray:
    """Covariance of the Gaussian encoded by the approximation (inverse assembled precision)."""
    if plan.n > KL_DENSE_LIMIT:
        raise DataError(f"implied covariance limited to n <= {KL_DENSE_LIMIT}")
    q = assemble_precision(plan, params)
    return chol_inverse(chol_factor(q))


def kl_divergence(sigma_e, sigma_a) -> float:
    """``KL(N(0, sigma_e) || N(0, sigma_a))`` from Cholesky factors of both."""
    sigma_e = np.asarray(sigma_e, dtype=float)
    sigma_a = np.asarray(sigma_a, dtype=float)
    if sigma_e.shape != sigma_a.shape or sigma_e.ndim != 2:
        raise DataError(f"dimension mismatch {sigma_e.shape} vs {sigma_a.shape}")
    n = sigma_e.shape[0]
    ge = chol_factor(sigma_e)
    ga = chol_factor(sigma_a)
    from scipy.linalg import solve_triangular

    m = solve_triangular(ga, ge, lower=True, check_finite=False)
    kl = 0.5 * (float(np.sum(m * m)) + logdet(ga) - logdet(ge) - n)
    if kl < KL_FLOOR:
        raise NumericError(f"negative KL divergence {kl}")
    return max(kl, 0.0)


def kl_report(plan: HierarchyPlan, params: CovarianceParams, sigma_e=None) -> KLReport:
    from .cov import cov_matrix

    if sigma_e is None:
        sigma_e = cov_matrix(plan.locs, None, params)
    kl = kl_divergence(sigma_e, implied_covariance(plan, params))
    return KLReport(plan.scheme.kind, plan.scheme.rank, plan.n, params, kl)


@dataclass(frozen=True)
class FrobeniusGap:
    lhs: float
    rhs: float
    eps2: float
    bound: float
    premise_holds: bool
    inequality_holds: bool


def frobenius_gap_check(sigma_jj, neighbors, r: int, m: int = 2, eps2: float | None = None) -> FrobeniusGap:
    """Compare the low-rank and nearest-neighbor reconstructions of ``sigma_jj``.

    ``neighbors`` are past indices sorted by distance to the target; the
    nearest-neighbor approximation keeps the ``r`` nearest, the low-rank one
    the ``m r`` nearest.  Both are embedded back into ``j x j`` and compared
    to ``sigma_jj`` in Frobenius norm.  ``eps2`` overrides the nugget rule.
    """
    s = np.asarray(sigma_jj, dtype=float)
    nb = np.asarray(neighbors, dtype=int)
    mr = m * r
    if nb.size < mr:
        raise DataError(f"need {mr} neighbors, got {nb.size}")
    hl = nb[:mr]
    nn = nb[:r]
    fac = build_hlr_factor(s[np.ix_(hl, hl)], r)
    e2 = fac.eps2 if eps2 is None else float(eps2)
    vh = (fac.P * fac.L) @ fac.P.T + e2 * np.eye(mr)
    approx_h = np.zeros_like(s)
    approx_h[np.ix_(hl, hl)] = vh
    approx_n = np.zeros_like(s)
    approx_n[np.ix_(nn, nn)] = s[np.ix_(nn, nn)]
    lhs = frobenius_norm(approx_h - s)
    rhs = frobenius_norm(approx_n - s)
    bound = fac.premise_bound
    return FrobeniusGap(lhs, rhs, e2, bound, bool(e2 < bound), bool(lhs <= rhs + 1e-9))


@dataclass(frozen=True)
class VariogramTable:
    """Rows ``(dir_bin, dist_bin, dir_center, dist_center, semivariance, count)``."""

    rows: list[tuple[int, int, float, float, float, int]]
    n_dist_bins: int
    n_dir_bins: int
    max_dist: float

    def grid(self) -> np.ndarray:
        """Semivariance as a ``(n_dir_bins, n_dist_bins)`` array, NaN where empty."""
        g = np.full((self.n_dir_bins, self.n_dist_bins), np.nan)
        for d, h, _, _, gam, _ in self.rows:
            g[d, h] = gam
        return g


def empirical_variogram(locs: LocationSet, values, n_dist_bins: int, n_dir_bins: int,
                        max_dist: float, chunk: int = 2048) -> VariogramTable:
    """Directional empirical semivariogram.

    Pairs closer than ``max_dist`` contribute ``(z_i - z_k)^2 / 2`` to the
    bin of their separation distance (equal width on ``[0, max_dist]``) and
    direction (equal width on ``[0, pi)``, folded modulo pi).
    """
    z = np.asarray(values, dtype=float)
    if z.size < 2 or z.size != locs.n:
        raise DataError("variogram needs at least two observations matching the locations")
    if n_dist_bins < 1 or n_dir_bins < 1 or not max_dist > 0:
        raise DataError("bins must be >= 1 and max_dist positive")
    pts = locs.scaled
    sums = np.zeros((n_dir_bins, n_dist_bins))
    counts = np.zeros((n_dir_bins, n_dist_bins), dtype=np.int64)
    n = z.size
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        dx = pts[None, :, 0] - pts[rows, None, 0]
        dy = pts[None, :, 1] - pts[rows, None, 1]
        upper = np.arange(n)[None, :] > rows[:, None]
        h = np.hypot(dx, dy)
        keep = upper & (h <= max_dist)
        if not keep.any():
            continue
        hk = h[keep]
        ang = np.mod(np.arctan2(dy[keep], dx[keep]), math.pi)
        gam = 0.5 * (z[rows, None] - z[None, :])[keep] ** 2
        hb = np.minimum((hk / max_dist * n_dist_bins).astype(int), n_dist_bins - 1)
        ab = np.minimum((ang / math.pi * n_dir_bins).astype(int), n_dir_bins - 1)
        np.add.at(sums, (ab, hb), gam)
        np.add.at(counts, (ab, hb), 1)
    rows_out = []
    for d in range(n_dir_bins):
        for hbin in range(n_dist_bins):
            c = int(counts[d, hbin])
            if c:
                rows_out.append((d, hbin, (d + 0.5) * math.pi / n_dir_bins,
                                 (hbin + 0.5) * max_dist / n_dist_bins, float(sums[d, hbin] / c), c))
    return VariogramTable(rows_out, n_dist_bins, n_dir_bins, float(max_dist))


def mse(estimates, truth: float) -> float:
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise DataError("mse of an empty estimate list")
    return float(np.mean((est - truth) ** 2))
