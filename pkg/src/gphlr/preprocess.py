"""Mean removal and the shifted (reflected) log transform for skewed residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class LinearTrend:
    intercept: float
    slope_x: float
    slope_y: float
    r2: float


def detrend(coords, values):
    """OLS of ``value`` on ``(1, x, y)``; returns ``(residuals, LinearTrend)``."""
    coords = np.asarray(coords, dtype=float)
    z = np.asarray(values, dtype=float)
    if z.size < 4:
        raise DataError("detrending needs at least 4 observations")
    design = np.column_stack([np.ones(z.size), coords[:, 0], coords[:, 1]])
    if np.linalg.matrix_rank(design) < 3:
        raise DataError("design matrix is rank deficient (collinear coordinates)")
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    resid = z - design @ coef
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return resid, LinearTrend(float(coef[0]), float(coef[1]), float(coef[2]), r2)


def reflection_shift(values) -> float:
    z = np.asarray(values, dtype=float)
    lo, hi = float(z.min()), float(z.max())
    if not hi > lo:
        raise DataError("transform needs a non-degenerate value range")
    return hi + 0.01 * (hi - lo)


def reflected_log(values, shift: float | None = None):
    """``log(c - z)``, which pulls in a long left tail; returns ``(transformed, c)``."""
    z = np.asarray(values, dtype=float)
    if z.size == 0:
        raise DataError("nothing to transform")
    c = reflection_shift(z) if shift is None else float(shift)
    if np.any(z >= c):
        raise DataError(f"shift {c} does not exceed every value")
    return np.log(c - z), c


def inverse_reflected_log(values, shift: float):
    return shift - np.exp(np.asarray(values, dtype=float))
