import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from gphlr.cov import CovarianceParams, cov_matrix
from gphlr.errors import DataError
from gphlr.estimate import FitSpec, fit_mle, loglik_profile, make_objective
from gphlr.geo import generate_perturbed_grid, order_locations
from gphlr.hierarchy import ConditioningScheme
from gphlr.likelihood import exact_loglik, simulate_field

TRUTH = CovarianceParams(1.0, 0.15, 0.5, 0.1)


@pytest.fixture(scope="module")
def data():
    locs = generate_perturbed_grid(144, 21)
    o = order_locations(locs)
    return locs, o, simulate_field(locs, o, TRUTH, seed=4)


def test_one_parameter_fit_matches_scalar_search(data):
    locs, o, z = data
    spec = FitSpec(initial={"beta": 0.3}, fixed={"alpha": 1.0, "nu": 0.5, "tau2": 0.1}, tol=1e-10)
    res = fit_mle(z, locs, o, spec)

    def neg(logb):
        return -exact_loglik(z, cov_matrix(locs, o, TRUTH.replace(beta=math.exp(logb)))).total

    ref = minimize_scalar(neg, bounds=(math.log(0.01), math.log(2.0)), method="bounded",
                          options={"xatol": 1e-9})
    assert res.estimates.beta == pytest.approx(math.exp(ref.x), rel=1e-4)
    assert res.loglik == pytest.approx(-ref.fun, abs=1e-8)


def test_fit_is_local_maximum_and_improves(data):
    locs, o, z = data
    init = {"alpha": 0.6, "beta": 0.3, "tau2": 0.3}
    spec = FitSpec(initial=init, fixed={"nu": 0.5}, scheme=ConditioningScheme("NN", 4))
    res = fit_mle(z, locs, o, spec)
    obj = make_objective(z, locs, o, spec.scheme)
    assert res.converged and res.evaluations <= 2000
    assert res.loglik >= obj(spec.params(init)) 
    for name in ("alpha", "beta", "tau2"):
        for f in (0.98, 1.02):
            p = res.estimates.replace(**{name: getattr(res.estimates, name) * f})
            assert obj(p) <= res.loglik + 1e-6


def test_fit_is_deterministic(data):
    locs, o, z = data
    spec = FitSpec(initial={"alpha": 0.8, "beta": 0.2, "tau2": 0.2}, fixed={"nu": 0.5},
                   scheme=ConditioningScheme("HLR", 2), max_evals=300)
    a, b = fit_mle(z, locs, o, spec), fit_mle(z, locs, o, spec)
    assert a.estimates == b.estimates and a.loglik == b.loglik


def test_nu_stays_in_box(data):
    locs, o, z = data
    spec = FitSpec(initial={"alpha": 1.0, "beta": 0.15, "nu": 4.9, "tau2": 0.1},
                   scheme=ConditioningScheme("NN", 3), max_evals=200)
    res = fit_mle(z, locs, o, spec)
    assert 0.05 <= res.estimates.nu <= 5.0
    assert all(0.05 <= p.nu <= 5.0 for p, _ in res.trace)


def test_spec_validation():
    with pytest.raises(DataError):
        FitSpec(initial={"alpha": 1.0}, fixed={"beta": 0.1, "nu": 0.5})
    with pytest.raises(DataError):
        FitSpec(initial={"alpha": 1.0, "beta": 0.1, "nu": 0.5, "tau2": 0.1}, fixed={"nu": 0.5})
    with pytest.raises(DataError):
        FitSpec(initial={"alpha": 1.0, "beta": 0.1, "nu": 0.5, "kappa": 1.0}, fixed={"tau2": 0.0})


def test_profile_peaks_near_fit(data):
    locs, o, z = data
    spec = FitSpec(initial={"beta": 0.3}, fixed={"alpha": 1.0, "nu": 0.5, "tau2": 0.1})
    best = fit_mle(z, locs, o, spec).estimates.beta
    grid = np.linspace(0.05, 0.5, 46)
    cells = loglik_profile(z, locs, o, None, "beta", grid, TRUTH)
    top = max(cells, key=lambda c: c.loglik)
    assert abs(top.value - best) <= 0.01 + 1e-12
    assert [c.value for c in cells] == sorted(c.value for c in cells)
