import numpy as np
import pytest

from minwealth import ConvergenceError, PenaltyFunction, ValueQuery, psi, value_general, value_indicator, value_step
from minwealth.value import Exponential, Shortfall

from golden import GOLDEN


def random_step_penalty(rng, n_max=5, lo=-3.0, hi=2.5):
    n = int(rng.integers(1, n_max + 1))
    bs = np.sort(rng.uniform(lo, hi, n))[::-1]
    return PenaltyFunction(a0=float(rng.uniform(0, 1)), jumps=tuple((float(b), float(rng.uniform(0.1, 2))) for b in bs))


def test_indicator_cases(sol):
    assert value_indicator(sol, ValueQuery(1.0, -0.5), 0.0) == 1.0
    assert value_indicator(sol, ValueQuery(1.0, 0.5), 0.0) == pytest.approx(psi(sol, 1.0, 0.0), rel=1e-15)
    assert value_indicator(sol, ValueQuery(1e-9, 1e-9), 0.0) == pytest.approx(1.0, abs=1e-8)


def test_indicator_at_safe_level(sol_c):
    assert value_indicator(sol_c, ValueQuery(3.0, 2.0), 0.0) == 0.0
    assert value_indicator(sol_c, ValueQuery(3.5, 3.5), 0.0) == 0.0


def test_step_rows(sol_a):
    f = PenaltyFunction(a0=0.25, jumps=((1.0, 0.5), (0.0, 2.0)))
    hw = lambda w: psi(sol_a, w, -10.0)  # noqa: E731  h up to a constant
    # m below every threshold
    assert value_step(sol_a, ValueQuery(2.0, -1.0), f) == pytest.approx(2.75, rel=1e-15)
    # m between thresholds
    mid = 0.25 + 2.0 * hw(2.0) / hw(0.0) + 0.5
    assert value_step(sol_a, ValueQuery(2.0, 0.5), f) == pytest.approx(mid, rel=1e-13)
    # m above every threshold
    top = 0.25 + 0.5 * hw(2.0) / hw(1.0) + 2.0 * hw(2.0) / hw(0.0)
    assert value_step(sol_a, ValueQuery(2.0, 1.5), f) == pytest.approx(top, rel=1e-13)
    one = PenaltyFunction.indicator(0.0)
    q = ValueQuery(1.7, 1.2)
    assert value_step(sol_a, q, one) == value_indicator(sol_a, q, 0.0)


def test_step_and_general_agree(sol):
    rng = np.random.default_rng(2024)
    hi = min(sol.w_safe - 0.05, 4.0)
    for _ in range(100):
        f = random_step_penalty(rng, hi=hi)
        w = float(rng.uniform(-2.0, hi))
        q = ValueQuery(w, float(w - rng.exponential(1.0)))
        assert value_general(sol, q, f) == pytest.approx(value_step(sol, q, f), rel=1e-12, abs=1e-15)


def test_constant_penalty(sol):
    assert value_general(sol, ValueQuery(0.7, 0.2), PenaltyFunction(a0=0.3)) == 0.3


def test_shortfall_reference(sol_a):
    v = value_general(sol_a, ValueQuery(2.0, 2.0), PenaltyFunction.shortfall(0.0))
    assert v == pytest.approx(GOLDEN["A"]["shortfall_w2_m2_b0"], abs=1e-9)


def test_staircase_converges_from_below(sol_a):
    # steps of size dx under max(b - m, 0) truncated at depth L; linearity gives the truncated target
    b, depth = 0.0, 20.0
    q = ValueQuery(2.0, 2.0)
    target = value_general(sol_a, q, PenaltyFunction.shortfall(b)) - value_general(sol_a, q, PenaltyFunction.shortfall(b - depth))
    errors = []
    for n in (50, 100, 200, 400):
        dx = depth / n
        f = PenaltyFunction(jumps=tuple((b - k * dx, dx) for k in range(1, n + 1)))
        v = value_step(sol_a, q, f)
        assert v <= target
        errors.append(target - v)
    ratios = np.array(errors[1:]) / np.array(errors[:-1])
    assert np.all(np.abs(ratios - 0.5) <= 0.1)


def test_neumann_condition(sol_a):
    # V_m(m, m) = 0, second-order one-sided difference in m from below
    f = PenaltyFunction.shortfall(0.0)
    w, eps = -0.5, 1e-3
    v = [value_general(sol_a, ValueQuery(w, w - k * eps), f, tol=1e-12) for k in range(3)]
    slope = (3 * v[0] - 4 * v[1] + v[2]) / (2 * eps)
    assert abs(slope) < 1e-4
    # away from the diagonal the m-derivative is clearly nonzero
    v_far = [value_general(sol_a, ValueQuery(w, w - 1.0 - k * eps), f, tol=1e-12) for k in range(2)]
    assert abs((v_far[0] - v_far[1]) / eps) > 0.1


def test_safe_level_limit(sol_c):
    f = PenaltyFunction.shortfall(0.0)
    ws = sol_c.w_safe
    assert value_general(sol_c, ValueQuery(ws - 1e-3, 0.5), f) < 1e-6
    assert value_general(sol_c, ValueQuery(ws - 1e-3, -0.5), f) == pytest.approx(0.5, abs=1e-6)
    assert value_general(sol_c, ValueQuery(ws, -0.5), f) == 0.5


def test_monotonicity(sol_b):
    f = PenaltyFunction(a0=0.1, jumps=((0.5, 0.3),), density=Shortfall(0.0))
    ws = [value_general(sol_b, ValueQuery(w, -0.2), f) for w in np.linspace(-0.2, 3.0, 7)]
    assert np.all(np.diff(ws) <= 1e-12)
    ms = [value_general(sol_b, ValueQuery(1.0, m), f) for m in np.linspace(1.0, -2.0, 7)]
    assert np.all(np.diff(ms) >= -1e-12)


def test_divergent_penalty_is_reported(sol_a):
    f = PenaltyFunction(density=Exponential(scale=1.0, rate=5.0))
    with pytest.raises(ConvergenceError):
        value_general(sol_a, ValueQuery(1.0, 1.0), f)


def test_penalty_validation_and_round_trip():
    with pytest.raises(ValueError):
        PenaltyFunction(a0=-1.0)
    with pytest.raises(ValueError):
        PenaltyFunction(jumps=((0.0, -1.0),))
    with pytest.raises(ValueError):
        PenaltyFunction.from_dict({"density": {"kind": "cubic"}})
    with pytest.raises(ValueError):
        ValueQuery(0.0, 1.0)
    doc = {"a0": 0.5, "jumps": [{"b": -1.0, "a": 1.0}, {"b": 1.0, "a": 2.0}], "density": {"kind": "shortfall", "b": 0.0}}
    f = PenaltyFunction.from_dict(doc)
    assert f.jumps == ((1.0, 2.0), (-1.0, 1.0))
    assert PenaltyFunction.from_dict(f.to_dict()) == f
    assert f(np.array([2.0, 0.5, -2.0])).tolist() == [0.5, 2.5, 5.5]
