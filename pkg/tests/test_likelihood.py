import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gphlr.cov import CovarianceParams, cov_matrix
from gphlr.diagnostics import implied_covariance, kl_divergence
from gphlr.errors import DataError, NumericError
from gphlr.geo import generate_perturbed_grid, order_locations
from gphlr.hierarchy import ConditioningScheme, build_plan
from gphlr.likelihood import (
    FieldSample, assemble_precision, conditional_logdensity, exact_loglik, hierarchical_loglik, plan_loglik,
    simulate_field, standardized_contrasts,
)

from oracle import dense_exact, loop_loglik


def test_exact_loglik_matches_scipy(grid100, params):
    locs, o = grid100
    s = cov_matrix(locs, o, params)
    z = simulate_field(locs, o, params, seed=2)
    assert exact_loglik(z, s).total == pytest.approx(dense_exact(z.values, s), rel=1e-11)


@pytest.mark.parametrize("kind,r", [("NN", 3), ("SUM", 3), ("NNSUM", 4), ("HLR", 2), ("HLR", 4)])
def test_hierarchical_matches_loop_oracle(grid100, params, kind, r):
    locs, o = grid100
    z = simulate_field(locs, o, params, seed=5)
    got = hierarchical_loglik(z, locs, o, params, ConditioningScheme(kind, r))
    want, _ = loop_loglik(locs.reordered(o).scaled, z.values, params, kind, r)
    assert got.total == pytest.approx(want, rel=1e-10)
    assert got.terms.size == 100 and math.fsum(got.terms) == pytest.approx(got.total, rel=1e-15)


def test_kl_fast_route(grid100, params):
    # with exact contrast variances the trace term is n, so KL reduces to log-determinants
    locs, o = grid100
    for kind, r in (("NN", 2), ("HLR", 3), ("IND", 5)):
        plan = build_plan(locs, o, ConditioningScheme(kind, r))
        s = cov_matrix(locs, o, params)
        slow = kl_divergence(s, implied_covariance(plan, params))
        if kind == "IND":
            continue
        _, v = loop_loglik(plan.locs.scaled, np.zeros(100), params, kind, r)
        fast = 0.5 * (np.sum(np.log(v)) - np.linalg.slogdet(s)[1])
        assert slow == pytest.approx(fast, rel=1e-8)


def test_workers_do_not_change_result(grid100, params):
    locs, o = grid100
    z = simulate_field(locs, o, params, seed=1)
    sch = ConditioningScheme("HLR", 3, block=7)
    a = hierarchical_loglik(z, locs, o, params, sch, workers=1)
    b = hierarchical_loglik(z, locs, o, params, sch, workers=4)
    assert a.total == b.total and np.array_equal(a.terms, b.terms)


def test_block_targets_full_rank_is_exact(grid100, params):
    locs, o = grid100
    z = simulate_field(locs, o, params, seed=1)
    want = exact_loglik(z, cov_matrix(locs, o, params)).total
    got = hierarchical_loglik(z, locs, o, params, ConditioningScheme("NN", 100, block=9))
    assert got.total == pytest.approx(want, rel=1e-11)


def test_conditional_logdensity_scalar():
    val, var = conditional_logdensity(1.0, [0.5], [2.0], [0.4], [[1.0]], [[1.0]])
    # w = 0, v = 1 - 0.4 + 0.25
    assert var == pytest.approx(0.85)
    assert val == pytest.approx(-0.5 * (math.log(0.85) + math.log(2 * math.pi)))
    with pytest.raises(NumericError):
        conditional_logdensity(0.0, [2.0], [0.0], [0.0], [[0.0]], [[0.0]])


def test_precision_inverse_of_implied(grid100, params):
    locs, o = grid100
    plan = build_plan(locs, o, ConditioningScheme("SUM", 3))
    q = assemble_precision(plan, params)
    np.testing.assert_allclose(np.linalg.inv(q), implied_covariance(plan, params), rtol=1e-8, atol=1e-10)


def test_detail_terms(grid100, params):
    locs, o = grid100
    z = simulate_field(locs, o, params, seed=3)
    res = hierarchical_loglik(z, locs, o, params, ConditioningScheme("NN", 2), detail=True)
    assert len(res.details) == 100
    assert res.details[10].footprint.size == 2 and isinstance(res.details[10].variance, float)


def test_field_sample_round_trip(grid100):
    locs, o = grid100
    vals = np.arange(100.0)
    fs = FieldSample.from_original(vals, locs, o)
    assert np.array_equal(fs.original_values(), vals)
    with pytest.raises(DataError):
        FieldSample(np.ones(99), locs, o)


def test_simulation_is_seeded_and_has_right_covariance():
    locs = generate_perturbed_grid(16, 2)
    p = CovarianceParams(1.0, 0.3, 0.5, 0.1)
    draws = simulate_field(locs, None, p, seed=7, replicates=4000)
    assert np.array_equal(draws, simulate_field(locs, None, p, seed=7, replicates=4000))
    emp = draws.T @ draws / 4000
    assert np.max(np.abs(emp - cov_matrix(locs, None, p))) < 0.12


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["NN", "SUM", "NNSUM", "HLR"]), st.integers(1, 5), st.integers(0, 1000))
def test_kl_nonnegative(kind, r, seed):
    locs = generate_perturbed_grid(36, seed)
    o = order_locations(locs)
    p = CovarianceParams(1.0, 0.25, 0.5, 0.05)
    plan = build_plan(locs, o, ConditioningScheme(kind, r))
    assert kl_divergence(cov_matrix(locs, o, p), implied_covariance(plan, p)) >= 0.0


def test_contrasts_standardized(grid100, params):
    locs, o = grid100
    plan = build_plan(locs, o, ConditioningScheme("NN", 99))
    z = simulate_field(locs, o, params, seed=11)
    w = standardized_contrasts(plan, z, params)
    g = np.linalg.cholesky(cov_matrix(locs, o, params))
    np.testing.assert_allclose(w, np.linalg.solve(g, z.values), rtol=1e-8, atol=1e-10)
