import math
from dataclasses import replace

import numpy as np
import pytest

from minwealth import DomainError, RuinSolution, h_eval, pi_from_derivatives, pi_star, psi, solve
from minwealth.ruin import hjb_residual, invert_dual

from conftest import canonical, solved
from draws import random_problems
from golden import GOLDEN


def _grid(sol, lo=-2.0, n=1001):
    hi = min(sol.w_safe, sol.spec.kappa + 10.0)
    w = np.linspace(lo, hi, n)
    return w[w < sol.w_safe]


def test_h_matches_reference(case, sol):
    for w, ref in GOLDEN[case]["h_at"].items():
        got = h_eval(sol, w)[0]
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-300), w


def test_psi_reference_case_a(sol_a):
    assert psi(sol_a, 2.0, 0.0) == pytest.approx(GOLDEN["A"]["h_at"][2.0], rel=1e-12)


def test_shape(case, sol):
    w = _grid(sol)
    h, h1, h2 = h_eval(sol, w)
    assert h_eval(sol, 0.0)[0] == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.diff(h) <= 0)
    assert np.all(h1 <= 0) and np.all(h2 > 0)
    second = h[2:] - 2 * h[1:-1] + h[:-2]
    assert np.all(second >= -1e-9)


def test_c1_across_kink(sol):
    k = sol.spec.kappa
    left = h_eval(sol, np.nextafter(k, -np.inf))
    right = h_eval(sol, k)
    assert left[0] == pytest.approx(right[0], rel=1e-12)
    assert left[1] == pytest.approx(right[1], rel=1e-8)


def test_safe_level_boundary(sol_c):
    ws = sol_c.w_safe
    assert h_eval(sol_c, ws) == (0.0, 0.0, 0.0)
    assert h_eval(sol_c, ws + 1.0)[0] == 0.0
    h, h1, _ = h_eval(sol_c, ws - 1e-9)
    assert abs(h) < 1e-8 and abs(h1) < 1e-8
    assert psi(sol_c, ws, 0.0) == 0.0
    with pytest.raises(DomainError):
        psi(sol_c, 3.5, ws)
    with pytest.raises(DomainError):
        pi_star(sol_c, ws)


def test_psi_bounds(sol):
    w = _grid(sol, lo=-1.0)
    p = psi(sol, w, -1.0)
    assert p[0] == 1.0
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) <= 0)
    assert psi(sol, 0.3, 0.3) == 1.0
    with pytest.raises(DomainError):
        psi(sol, -2.0, -1.0)


def test_invert_dual(sol):
    d = sol.dual.sol
    assert invert_dual(sol, 0.0) == pytest.approx(d.y0, rel=1e-13)
    assert invert_dual(sol, sol.spec.kappa - 1e-12) == pytest.approx(d.y_kappa, rel=1e-9)
    w = np.random.default_rng(3).uniform(-5.0, sol.spec.kappa, 500)
    y = invert_dual(sol, w)
    slope = sol.dual.outer(y)[1]
    assert np.max(np.abs(slope - w) / np.maximum(1.0, np.abs(w))) < 1e-12
    # Legendre round trip
    assert np.max(np.abs(sol.dual(y)[0] - w * y - h_eval(sol, w)[0])) < 1e-10
    with pytest.raises(DomainError):
        invert_dual(sol, sol.spec.kappa)


def test_strategy_forms(sol):
    w = _grid(sol)
    w = w[np.abs(w - sol.spec.kappa) > 1e-6]
    a, b = pi_star(sol, w), pi_from_derivatives(sol, w)
    assert np.max(np.abs(a / b - 1)) < 1e-8
    k = sol.spec.kappa
    assert pi_star(sol, np.nextafter(k, -np.inf)) == pytest.approx(pi_star(sol, k), rel=1e-8)


def test_strategy_case_values(sol_a, sol_b):
    w = np.linspace(1.01, 11.0, 50)
    assert np.allclose(pi_star(sol_b, w), 0.5, rtol=1e-14)
    d = GOLDEN["A"]["d"]
    assert np.allclose(pi_star(sol_a, w), (w + 1.0 / 3.0) / (1.0 - d), rtol=1e-13)
    assert 1.0 / (1.0 - d) == pytest.approx(0.362540, abs=2e-6)


def test_strategy_monotonicity(sol_a, sol_c):
    below = np.linspace(-3.0, 0.999, 400)
    above = np.linspace(1.0, 11.0, 400)
    assert np.all(np.diff(pi_star(sol_a, below)) < 0)
    assert np.all(np.diff(pi_star(sol_a, above)) > 0)
    assert np.all(np.diff(pi_star(sol_c, np.linspace(1.0, 2.999, 400))) < 0)


def test_hjb_residual(sol):
    w = _grid(sol)
    w = w[w != sol.spec.kappa]
    h = h_eval(sol, w)[0]
    bound = 1e-8 * (1.0 + sol.params.lam * np.abs(h))
    assert np.all(np.abs(hjb_residual(sol, w)) < bound)


def test_ratio_independent_of_ruin_level(sol):
    rng = np.random.default_rng(11)
    hi = min(sol.w_safe, 8.0)
    for _ in range(5):
        b1, b2 = rng.uniform(-2.0, 0.5, 2)
        w = np.linspace(max(b1, b2) + 0.1, hi - 0.1, 300)
        ratio = psi(sol, w, b1) / psi(sol, w, b2)
        assert np.max(np.abs(ratio / ratio[0] - 1)) < 1e-9


def test_strategy_decreases_in_rho_below_kink():
    # consumption below the kink is held fixed (c_bar + rho*kappa constant) while rho moves
    rng = np.random.default_rng(5)
    bump = 1e-3
    for params, spec in random_problems("greater", 60, 21):
        w = np.concatenate((rng.uniform(-3.0, spec.kappa - 0.01, 20), [spec.kappa - 0.01]))
        up = solve(replace(params, rho=params.rho + bump),
                   replace(spec, rho=spec.rho + bump, c_bar=spec.c_bar - bump * spec.kappa))
        base = solve(params, spec)
        lo, hi = pi_star(up, w), pi_star(base, w)
        assert np.all(lo - hi <= 1e-12 * np.abs(hi))
        assert np.any(lo < hi * (1 - 1e-9))


def test_perturbed_solution_is_caught(sol_a):
    # any D1 still solves the linear dual equation, so the pointwise residual stays tiny;
    # the perturbation shows up in the boundary conditions instead
    from minwealth import boundary_residuals

    d = sol_a.dual
    bad_dual = replace(d, sol=replace(d.sol, D1=d.sol.D1 * 1.01, P=d.sol.P * 1.01))
    bad = RuinSolution(sol_a.params, sol_a.spec, bad_dual)
    assert max(boundary_residuals(bad_dual).values()) > 1e-4
    assert abs(h_eval(bad, 0.0)[0] - 1.0) > 1e-4


def test_scalar_and_array_agree(sol):
    w = np.array([-1.0, 0.5, 2.0])
    arr = h_eval(sol, w)
    for i, x in enumerate(w):
        assert h_eval(sol, float(x))[0] == pytest.approx(arr[0][i], rel=1e-14)
    assert isinstance(psi(sol, 2.0, 0.0), float)


def test_solution_is_reusable():
    assert solved("A") is solved("A")
    params, spec = canonical("A")
    assert math.isfinite(solve(params, spec).K_outer)
