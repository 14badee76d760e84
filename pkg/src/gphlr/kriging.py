"""Exact simple kriging for a zero-mean field (desk-scale validation)."""

from __future__ import annotations

import numpy as np

from .cov import CovarianceParams, matern
from .errors import DataError
from .geo import LocationSet, pairwise_distances
from .linalg import chol_factor, chol_solve

KRIGING_LIMIT = 5000


def simple_kriging(train: LocationSet, values, targets: LocationSet, params: CovarianceParams):
    """Predictions ``s^T S^{-1} z`` and standard errors ``sqrt(C(0) - s^T S^{-1} s)``."""
    z = np.asarray(values, dtype=float)
    if train.n > KRIGING_LIMIT:
        raise DataError(f"exact kriging limited to n <= {KRIGING_LIMIT}")
    if z.shape != (train.n,):
        raise DataError("values do not match training locations")
    g = chol_factor(matern(train.distance_matrix(), params))
    cross = matern(pairwise_distances(train.scaled, targets.scaled), params)
    w = chol_solve(g, cross)
    pred = w.T @ z
    var = params.alpha + params.tau2 - np.einsum("ij,ij->j", cross, w)
    return pred, np.sqrt(np.clip(var, 0.0, None))
