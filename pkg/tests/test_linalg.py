import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gphlr.errors import DefinitenessError
from gphlr.linalg import (
    batched_chol_solve, batched_cholesky, batched_smw_apply, chol_factor, chol_inverse, chol_solve,
    frobenius_norm, logdet, smw_apply, sym_eigen,
)


def spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def test_cholesky_solve_logdet(rng):
    a = spd(rng, 12)
    b = rng.standard_normal((12, 3))
    f = chol_factor(a)
    np.testing.assert_allclose(chol_solve(f, b), np.linalg.solve(a, b), rtol=1e-12)
    # LU-based determinant as an independent route
    sign, ld = np.linalg.slogdet(a)
    assert sign > 0 and logdet(f) == pytest.approx(ld, rel=1e-13)
    np.testing.assert_allclose(chol_inverse(f), np.linalg.inv(a), rtol=1e-11, atol=1e-14)


def test_definiteness_error_reports_pivot():
    a = np.diag([1.0, 2.0, -1.0, 4.0])
    with pytest.raises(DefinitenessError) as exc:
        chol_factor(a)
    assert exc.value.pivot == 2


def test_sym_eigen_descending(rng):
    a = spd(rng, 8)
    vals, vecs = sym_eigen(a)
    assert np.all(np.diff(vals) <= 0)
    np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 14), st.integers(0, 3), st.floats(1e-3, 10.0))
def test_smw_matches_dense_inverse(seed, n, r, eps2):
    rng = np.random.default_rng(seed)
    r = min(r, n - 1)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    p = q[:, :r]
    lam = rng.uniform(0.5, 5.0, r)
    rhs = rng.standard_normal((n, 2))
    dense = p @ np.diag(lam) @ p.T + eps2 * np.eye(n)
    np.testing.assert_allclose(smw_apply(p, lam, eps2, rhs), np.linalg.solve(dense, rhs), rtol=1e-8, atol=1e-10)


def test_batched_routes_agree(rng):
    mats = np.stack([spd(rng, 6) for _ in range(5)])
    rhs = rng.standard_normal((5, 6, 2))
    f = batched_cholesky(mats)
    np.testing.assert_allclose(f @ np.swapaxes(f, 1, 2), mats, rtol=1e-13)
    np.testing.assert_allclose(batched_chol_solve(mats, rhs), np.linalg.solve(mats, rhs), rtol=1e-11)
    vals, vecs = sym_eigen(mats)
    p, lam = vecs[:, :, :2], vals[:, :2]
    eps2 = np.full(5, 0.3)
    dense = p @ (lam[:, :, None] * np.swapaxes(p, 1, 2)) + 0.3 * np.eye(6)
    np.testing.assert_allclose(batched_smw_apply(p, lam, eps2, rhs), np.linalg.solve(dense, rhs), rtol=1e-10)


def test_batched_cholesky_names_failing_step():
    mats = np.stack([np.eye(3), -np.eye(3)])
    with pytest.raises(DefinitenessError) as exc:
        batched_cholesky(mats, steps=[10, 11])
    assert exc.value.step == 11


def test_frobenius():
    assert frobenius_norm(np.array([[3.0, 0.0], [0.0, 4.0]])) == pytest.approx(5.0)
