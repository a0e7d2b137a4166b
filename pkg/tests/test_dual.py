import math

import numpy as np
import pytest
from hypothesis import given, settings

from minwealth import Regime, boundary_residuals, derive_constants, make_dual, solve_boundary_system, solve_ratio
from minwealth.dual import dual_eval, ratio_equation_lhs

from conftest import canonical
from draws import valid_problem
from golden import GOLDEN


def _ode_residual(f, params, spec, y):
    """Residual of the linear dual equation on either side of y_kappa."""
    h, h1, h2 = (np.asarray(a) for a in f(y))
    delta, lam, r = f.consts.delta, params.lam, params.r
    outer = y > f.sol.y_kappa
    slope = np.where(outer, 0.0, spec.rho)
    source = np.where(outer, spec.c_bar + spec.rho * spec.kappa, spec.c_bar) * y
    res = lam * h + (r - slope - lam) * y * h1 - delta * y * y * h2 - source
    return np.abs(res) / (1.0 + np.abs(h))


@pytest.mark.parametrize("case", "ABC")
def test_quintuple_matches_reference(case):
    params, spec = canonical(case)
    sol = solve_boundary_system(params, spec)
    g = GOLDEN[case]
    assert solve_ratio(params, spec) == pytest.approx(g["ratio"], rel=1e-12)
    for key in ("y0", "y_kappa", "D1", "D2", "Dhat1"):
        assert getattr(sol, key) == pytest.approx(g[key], rel=1e-11), key


def test_ratio_equation_observations():
    params, spec = canonical("A")
    a = (spec.c_bar + spec.rho * spec.kappa) / params.r
    assert ratio_equation_lhs(1.0, params, spec) == pytest.approx(a - spec.kappa, rel=1e-13)
    xs = np.linspace(1.0, 50.0, 500)
    vals = np.array([ratio_equation_lhs(x, params, spec) for x in xs])
    assert np.all(np.diff(vals) > 0)
    assert ratio_equation_lhs(1e6, params, spec) > 100 * a
    x = solve_ratio(params, spec)
    assert ratio_equation_lhs(x * (1 - 1e-3), params, spec) < a < ratio_equation_lhs(x * (1 + 1e-3), params, spec)
    assert abs(ratio_equation_lhs(x, params, spec) - a) < 1e-12 * max(1.0, a)


@pytest.mark.parametrize("case", "ABC")
def test_dual_boundary_values(case):
    f = make_dual(*canonical(case))
    s = f.sol
    h0, h1_0, _ = dual_eval(f, s.y0)
    assert h0 == pytest.approx(1.0, abs=1e-12) and abs(h1_0) < 1e-12
    assert abs(dual_eval(f, 1e-40)[0]) < 1e-20
    left = f.inner(s.y_kappa)[1]
    right = f.outer(s.y_kappa)[1]
    assert left == pytest.approx(f.spec.kappa, rel=1e-12) and right == pytest.approx(f.spec.kappa, rel=1e-12)
    assert s.y0 > s.y_kappa > 0
    assert s.to_dict()["regime"] == f.consts.regime.value
    assert set(s.to_dict()) == {"y0", "y_kappa", "D1", "D2", "Dhat1", "regime"}


@pytest.mark.parametrize("case", "ABC")
def test_dual_ode_and_concavity(case):
    params, spec = canonical(case)
    f = make_dual(params, spec)
    y = np.geomspace(1e-6 * f.sol.y_kappa, f.sol.y0, 10_000)
    assert np.max(_ode_residual(f, params, spec, y)) < 1e-8
    _, h1, h2 = f(y)
    assert np.all(np.diff(h1) < 0)
    assert np.all(h2 <= 1e-12)


def test_inner_slope_tends_to_safe_level():
    f = make_dual(*canonical("C"))
    # the approach is like y^(Bhat1 - 1) with Bhat1 - 1 ~ 0.19, so it needs a very small y
    slope = f(1e-30 * f.sol.y_kappa)[1]
    assert slope == pytest.approx(3.0, rel=1e-4)
    slopes = f(np.geomspace(1e-30, 1e-5, 6) * f.sol.y_kappa)[1]
    assert np.all(np.diff(np.abs(slopes - 3.0)) > 0)


def test_rejects_nonpositive_dual_variable():
    f = make_dual(*canonical("A"))
    with pytest.raises(ValueError):
        f(0.0)


def _check_system(problem):
    params, spec = problem
    f = make_dual(params, spec)
    assert max(boundary_residuals(f).values()) < 1e-9
    assert f.sol.D1 < 0
    assert f.sol.y0 > f.sol.y_kappa > 0
    assert math.isfinite(f.sol.D2)


@settings(max_examples=1000, deadline=None)
@given(valid_problem("greater"))
def test_boundary_system_greater(problem):
    _check_system(problem)


@settings(max_examples=1000, deadline=None)
@given(valid_problem("equal"))
def test_boundary_system_equal(problem):
    _check_system(problem)


@settings(max_examples=1000, deadline=None)
@given(valid_problem("less"))
def test_boundary_system_less(problem):
    _check_system(problem)


def test_regime_copied_into_solution():
    for case, regime in zip("ABC", Regime):
        params, spec = canonical(case)
        assert solve_boundary_system(params, spec).regime is derive_constants(params, spec).regime is regime
