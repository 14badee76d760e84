"""Matérn covariance with nugget and covariance matrix assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_k
from .errors import DataError
from .geo import LocationSet, Ordering, pairwise_distances

# Below this scaled distance the Matérn correlation is taken at its limit 1.
_ORIGIN_CUTOFF = 1e-8
NU_MAX = 5.0


@dataclass(frozen=True)
class CovarianceParams:
    """Matérn parameters: sill ``alpha``, range ``beta``, smoothness ``nu``, nugget ``tau2``."""

    alpha: float
    beta: float
    nu: float
    tau2: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "nu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DataError(f"{name} must be positive and finite, got {v}")
        if not (math.isfinite(self.tau2) and self.tau2 >= 0):
            raise DataError(f"tau2 must be nonnegative and finite, got {self.tau2}")

    def as_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "nu": self.nu, "tau2": self.tau2}

    def replace(self, **kw) -> "CovarianceParams":
        d = self.as_dict()
        d.update(kw)
        return CovarianceParams(**d)


def matern_correlation(h, beta: float, nu: float) -> np.ndarray:
    """Matérn correlation at distances ``h`` (no nugget); equals 1 at h = 0."""
    h = np.asarray(h, dtype=float)
    x = math.sqrt(2.0 * nu) * h / beta
    if nu == 0.5:
        return np.exp(-x)
    if nu == 1.5:
        return (1.0 + x) * np.exp(-x)
    if nu == 2.5:
        return (1.0 + x + x * x / 3.0) * np.exp(-x)
    return _matern_bessel(x, nu)


def _matern_bessel(x: np.ndarray, nu: float) -> np.ndarray:
    out = np.ones(x.shape)
    far = x >= _ORIGIN_CUTOFF
    if far.any():
        xf = x[far]
        # log-space normalisation keeps x**nu / (Gamma(nu) 2**(nu-1)) finite
        lognorm = nu * np.log(xf) - math.lgamma(nu) - (nu - 1.0) * math.log(2.0)
        out[far] = np.exp(lognorm) * bessel_k(nu, xf)
    return out


def matern(h, p: CovarianceParams):
    """Matérn covariance with nugget: ``alpha * rho(h) + tau2 * 1(h == 0)``."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DataError("distances must be nonnegative")
    c = p.alpha * matern_correlation(h_arr, p.beta, p.nu)
    if p.tau2:
        c = c + p.tau2 * (h_arr == 0)
    return float(c) if np.ndim(h) == 0 else c


def cov_matrix(locs: LocationSet, ordering: Ordering | None, p: CovarianceParams) -> np.ndarray:
    """Covariance matrix with rows and columns in sequence order.

    Entry ``(i, k)`` is the covariance between points ``perm[i]`` and ``perm[k]``.
    """
    pts = locs.scaled if ordering is None else locs.scaled[ordering.perm]
    d = pairwise_distances(pts, pts)
    off = ~np.eye(len(pts), dtype=bool)
    if np.any(d[off] == 0):
        raise DataError("duplicate locations make the nugget unidentifiable")
    c = p.alpha * matern_correlation(d, p.beta, p.nu)
    c[np.diag_indices_from(c)] = p.alpha + p.tau2
    return c


def cross_cov(locs: LocationSet, target, conditioning, p: CovarianceParams):
    """Covariances between a target block and a conditioning set.

    Returns ``(sigma, target_cov)`` where ``sigma[c, t]`` is the covariance of
    conditioning point ``c`` with target ``t`` and ``target_cov`` is the
    block's own covariance matrix.  Indices refer to ``locs``.
    """
    target = np.atleast_1d(np.asarray(target, dtype=int))
    conditioning = np.atleast_1d(np.asarray(conditioning, dtype=int))
    if np.intersect1d(target, conditioning).size:
        raise DataError("target and conditioning index sets overlap")
    for idx in (target, conditioning):
        if idx.size and (idx.min() < 0 or idx.max() >= locs.n):
            raise DataError("index out of range")
    tpts = locs.scaled[target]
    cpts = locs.scaled[conditioning]
    sigma = p.alpha * matern_correlation(pairwise_distances(cpts, tpts), p.beta, p.nu)
    tt = p.alpha * matern_correlation(pairwise_distances(tpts, tpts), p.beta, p.nu)
    tt[np.diag_indices_from(tt)] = p.alpha + p.tau2
    return sigma, tt
