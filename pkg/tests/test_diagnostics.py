import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gphlr.cov import CovarianceParams, cov_matrix
from gphlr.diagnostics import (
    empirical_variogram, frobenius_gap_check, implied_covariance, kl_divergence, kl_report, mse,
)
from gphlr.errors import DataError
from gphlr.geo import LocationSet, generate_perturbed_grid, order_locations
from gphlr.hierarchy import ConditioningScheme, build_plan


def gaussian_kl_lu(se, sa):
    """KL by explicit inverse and LU determinants."""
    n = se.shape[0]
    return 0.5 * (np.trace(np.linalg.inv(sa) @ se) + np.linalg.slogdet(sa)[1] - np.linalg.slogdet(se)[1] - n)


def test_kl_matches_lu_route(rng):
    a = rng.standard_normal((10, 14))
    b = rng.standard_normal((10, 14))
    se, sa = a @ a.T + np.eye(10), b @ b.T + np.eye(10)
    assert kl_divergence(se, sa) == pytest.approx(gaussian_kl_lu(se, sa), rel=1e-10)
    assert kl_divergence(se, se) == pytest.approx(0.0, abs=1e-12)


def test_kl_of_exact_plan_is_zero(grid100, params):
    locs, o = grid100
    plan = build_plan(locs, o, ConditioningScheme("NN", 99))
    assert kl_report(plan, params).kl == pytest.approx(0.0, abs=1e-9)


def test_ind_worse_than_nn(grid100, params):
    locs, o = grid100
    s = cov_matrix(locs, o, params)
    kls = {k: kl_divergence(s, implied_covariance(build_plan(locs, o, ConditioningScheme(k, 4)), params))
           for k in ("IND", "NN", "SUM", "NNSUM", "HLR")}
    assert kls["IND"] == max(kls.values())


def test_nn_kl_nonincreasing_in_rank(grid100, params):
    locs, o = grid100
    s = cov_matrix(locs, o, params)
    kl = [kl_divergence(s, implied_covariance(build_plan(locs, o, ConditioningScheme("NN", r)), params))
          for r in range(1, 12)]
    assert all(b <= a + 1e-9 for a, b in zip(kl, kl[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8), st.floats(0.05, 0.6), st.sampled_from([0.5, 1.0, 1.5]),
       st.sampled_from([0.0, 0.15]))
def test_frobenius_gap_property(seed, r, beta, nu, tau2):
    locs = generate_perturbed_grid(64, seed)
    o = order_locations(locs)
    pts = locs.reordered(o).scaled
    j = 63
    s = cov_matrix(LocationSet(pts[:j]), None, CovarianceParams(1.0, beta, nu, tau2))
    d = np.hypot(*(pts[:j] - pts[j]).T)
    nb = sorted(range(j), key=lambda i: (d[i], i))
    g = frobenius_gap_check(s, nb, r)
    assert g.premise_holds and g.inequality_holds
    # with the tail-mean nugget the gap equals the discarded spectrum
    vals = np.sort(np.linalg.eigvalsh(s[np.ix_(nb[:2 * r], nb[:2 * r])]))[::-1]
    hl = nb[: 2 * r]
    outside = np.ones_like(s, dtype=bool)
    outside[np.ix_(hl, hl)] = False
    tail = vals[r:]
    inner = r * g.eps2 ** 2 + np.sum((tail - g.eps2) ** 2)
    if g.eps2 == np.mean(tail):
        # m = 2 and no clamp: the block error is exactly the discarded energy
        assert inner == pytest.approx(np.sum(tail ** 2), rel=1e-10)
    assert g.lhs ** 2 == pytest.approx(inner + np.sum(s[outside] ** 2), rel=1e-9)


def test_variogram_against_pair_loop():
    rng = np.random.default_rng(3)
    pts = rng.uniform(size=(60, 2))
    z = rng.standard_normal(60)
    t = empirical_variogram(LocationSet(pts), z, n_dist_bins=4, n_dir_bins=3, max_dist=0.8, chunk=7)
    sums = np.zeros((3, 4))
    counts = np.zeros((3, 4), dtype=int)
    for i in range(60):
        for j in range(i + 1, 60):
            dx, dy = pts[j] - pts[i]
            h = math.hypot(dx, dy)
            if h >= 0.8:
                continue
            ang = math.atan2(dy, dx) % math.pi
            a = min(int(ang / (math.pi / 3)), 2)
            b = int(h / 0.2)
            sums[a, b] += 0.5 * (z[i] - z[j]) ** 2
            counts[a, b] += 1
    for row in t.rows:
        a, b, _, _, gam, cnt = row
        assert cnt == counts[a, b]
        if cnt:
            assert gam == pytest.approx(sums[a, b] / cnt, rel=1e-12)


def test_mse():
    assert mse([1.0, 3.0], 2.0) == 1.0
    with pytest.raises(DataError):
        mse([], 1.0)
