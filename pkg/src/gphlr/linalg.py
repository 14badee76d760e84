"""Dense symmetric linear algebra: Cholesky, eigen, Sherman-Morrison-Woodbury.

LAPACK does the heavy lifting; these wrappers fix the contracts (error types,
eigenvalue order) and add batched variants used by the hierarchy evaluator.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DataError, DefinitenessError, NumericError


def chol_factor(m) -> np.ndarray:
    """Lower Cholesky factor ``G`` with ``m = G @ G.T``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"expected a square matrix, got shape {m.shape}")
    if m.size == 0:
        return np.zeros((0, 0))
    g, info = lapack.dpotrf(m, lower=1, clean=1)
    if info > 0:
        raise DefinitenessError(f"matrix not positive definite (pivot {info - 1})", pivot=info - 1)
    if info < 0:
        raise NumericError(f"dpotrf illegal argument {-info}")
    return g


def chol_solve(g: np.ndarray, rhs) -> np.ndarray:
    """Solve ``(G G^T) x = rhs``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != g.shape[0]:
        raise DataError(f"dimension mismatch: factor {g.shape}, rhs {rhs.shape}")
    if g.size == 0:
        return rhs.copy()
    y = solve_triangular(g, rhs, lower=True, check_finite=False)
    return solve_triangular(g.T, y, lower=False, check_finite=False)


def logdet(g: np.ndarray) -> float:
    """log-determinant of ``G G^T`` from its Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(g))))


def chol_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of ``G G^T`` as a full symmetric matrix."""
    inv, info = lapack.dpotri(g, lower=1)
    if info != 0:
        raise NumericError(f"dpotri failed with info={info}")
    return np.tril(inv) + np.tril(inv, -1).T


def sym_eigen(m):
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order.

    Returns ``(values, vectors)`` with eigenvectors as columns.
    """
    m = np.asarray(m, dtype=float)
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition did not converge: {exc}") from exc
    return vals[..., ::-1], vecs[..., ::-1]


def smw_apply(p, l, eps2: float, rhs) -> np.ndarray:
    """``(P diag(L) P^T + eps2 I)^{-1} rhs`` through an ``r x r`` inner solve.

    Uses ``eps2^{-1} I - eps2^{-2} P (L^{-1} + eps2^{-1} P^T P)^{-1} P^T``.
    """
    p = np.asarray(p, dtype=float)
    l = np.asarray(l, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if not eps2 > 0:
        raise DataError("eps2 must be positive")
    if np.any(l <= 0):
        raise DataError("low-rank eigenvalues must be positive")
    if p.ndim != 2 or p.shape[1] == 0:
        return rhs / eps2
    inner = np.diag(1.0 / l) + (p.T @ p) / eps2
    try:
        g = chol_factor(inner)
    except DefinitenessError as exc:
        raise NumericError("singular SMW inner matrix") from exc
    return rhs / eps2 - (p @ chol_solve(g, p.T @ rhs)) / eps2**2


def frobenius_norm(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.sqrt(np.sum(m * m)))


# ---------------------------------------------------------------------------
# batched helpers: leading axis indexes independent problems
# ---------------------------------------------------------------------------


def batched_cholesky(m: np.ndarray, steps=None) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    # locate the offending problem for the error message
    for i in range(m.shape[0]):
        try:
            np.linalg.cholesky(m[i])
        except np.linalg.LinAlgError:
            step = None if steps is None else int(steps[i])
            raise DefinitenessError(f"non positive definite matrix at hierarchy step {step}", step=step) from None
    raise NumericError("batched Cholesky failed")


def batched_chol_solve(m: np.ndarray, rhs: np.ndarray, steps=None) -> np.ndarray:
    g = batched_cholesky(m, steps)
    y = np.linalg.solve(g, rhs)
    return np.linalg.solve(np.swapaxes(g, -1, -2), y)


def batched_smw_apply(p: np.ndarray, l: np.ndarray, eps2: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched :func:`smw_apply`; ``p`` is (g, mr, r), ``l`` (g, r), ``eps2`` (g,), ``rhs`` (g, mr, b)."""
    e = eps2[:, None, None]
    ptp = np.swapaxes(p, -1, -2) @ p
    r = l.shape[1]
    inner = ptp / e
    inner[:, np.arange(r), np.arange(r)] += 1.0 / l
    corr = p @ batched_chol_solve(inner, np.swapaxes(p, -1, -2) @ rhs)
    return rhs / e - corr / e**2
