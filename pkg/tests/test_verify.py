import math

import numpy as np
import pytest

from minwealth import PenaltyFunction, psi
from minwealth.ruin import h_value
from minwealth.verify import (FdConvergenceError, FdGrid, SimConfig, SimResult, fd_solve, ode_residual,
                              simulate_minimum, simulate_penalty, simulate_ruin)

from conftest import canonical, solved


def joint_bound(*results):
    return 3.0 * math.sqrt(sum(r.std_error**2 for r in results))


def test_sim_config_validation():
    with pytest.raises(ValueError, match="dt"):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError, match="n_paths"):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError, match="seed"):
        SimConfig(seed=-1)
    with pytest.raises(ValueError, match="m_init"):
        SimConfig(w_init=1.0, m_init=2.0)
    with pytest.raises(ValueError, match="unknown sim keys"):
        SimConfig.from_dict({"steps": 3})
    cfg = SimConfig(dt=0.01, n_paths=10, seed=3)
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.minimum == cfg.w_init


def test_sim_result_summary():
    x = np.array([0.0, 1.0, 0.0, 1.0])
    res = SimResult.from_samples(x, np.array([False, False, False, True]))
    assert res.estimate == 0.5
    assert res.std_error == pytest.approx(np.std(x, ddof=1) / 2)
    assert res.ci95 == pytest.approx((0.5 - 1.96 * res.std_error, 0.5 + 1.96 * res.std_error))
    assert res.n_capped == 1 and res.unreliable


def test_start_at_ruin_level_is_certain_ruin(sol_a):
    res = simulate_ruin(SimConfig(dt=0.01, n_paths=500, w_init=0.0), sol_a, 0.0)
    assert res.estimate == 1.0 and res.std_error == 0.0


def test_start_at_safe_level_never_ruins(sol_c):
    res = simulate_ruin(SimConfig(dt=0.01, n_paths=500, w_init=sol_c.w_safe), sol_c, 0.0)
    assert res.estimate == 0.0


@pytest.mark.parametrize("case", "ABC")
def test_ruin_estimate_small_run(case):
    sol = solved(case)
    cfg = SimConfig(dt=0.01, n_paths=20_000, seed=11, w_init=1.5)
    res = simulate_ruin(cfg, sol, 0.0)
    assert abs(res.estimate - psi(sol, 1.5, 0.0)) < 3 * res.std_error + 2 * cfg.dt


def test_seed_determinism(sol_a):
    cfg = SimConfig(dt=0.02, n_paths=2000, seed=42)
    first = simulate_ruin(cfg, sol_a, 0.0).to_json()
    assert simulate_ruin(cfg, sol_a, 0.0).to_json() == first
    other = SimConfig(dt=0.02, n_paths=2000, seed=43)
    assert simulate_ruin(other, sol_a, 0.0).to_json() != first


def test_constant_penalty_has_no_variance(sol_a):
    res = simulate_penalty(SimConfig(dt=0.02, n_paths=1000), sol_a, PenaltyFunction(a0=0.7))
    assert res.estimate == pytest.approx(0.7, abs=1e-14) and res.std_error < 1e-15


def test_minimum_never_exceeds_start(sol_a):
    cfg = SimConfig(dt=0.02, n_paths=2000, w_init=2.0, m_init=1.0)
    minima, capped = simulate_minimum(cfg, sol_a)
    assert np.all(minima <= 1.0) and not capped.any()


def test_indicator_penalty_matches_ruin_estimator(sol_a):
    cfg = SimConfig(dt=0.01, n_paths=20_000, seed=5, w_init=1.0)
    ruin = simulate_ruin(cfg, sol_a, 0.0)
    pen = simulate_penalty(cfg, sol_a, PenaltyFunction.indicator(0.0))
    assert abs(ruin.estimate - pen.estimate) < joint_bound(ruin, pen)


@pytest.mark.slow
def test_euler_bias_shrinks_with_step(sol_a):
    exact = psi(sol_a, 2.0, 0.0)
    ests = {}
    for dt in (1 / 50, 1 / 250):
        cfg = SimConfig(dt=dt, n_paths=100_000, seed=2024)
        res = simulate_ruin(cfg, sol_a, 0.0)
        assert abs(res.estimate - exact) < 3 * res.std_error + 2 * dt
        ests[dt] = res.estimate
    # discrete monitoring misses crossings, so the coarse step sits lower
    assert ests[1 / 250] > ests[1 / 50]


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def fd_error(case, n):
    params, spec = canonical(case)
    sol = solved(case)
    # far boundary where h is negligible; errors measured on a window well inside it
    hi = min(sol.w_safe, spec.kappa + 40.0)
    fd = fd_solve(params, spec, FdGrid(-1.0, hi, n))
    mask = fd.w <= min(hi, spec.kappa + 5.0)
    err = np.max(np.abs(fd.h[mask] - h_value(sol, fd.w[mask])))
    return fd, fd.h[mask], err


@pytest.mark.parametrize("case", "ABC")
def test_fd_converges_to_closed_form(case):
    _, _, err_c = fd_error(case, 2001)
    fd_f, h, err_f = fd_error(case, 4001)
    assert err_f < 1e-3
    assert err_f < 0.6 * err_c
    assert not fd_f.cap_active
    assert np.all(np.diff(h) < 0)
    assert np.all(np.diff(h, 2) > -1e-12)


def test_fd_safe_level_boundary(sol_c):
    params, spec = canonical("C")
    fd = fd_solve(params, spec, FdGrid(-1.0, sol_c.w_safe, 801))
    assert fd.w[-1] == sol_c.w_safe and fd.h[-1] == 0.0


def test_fd_grid_snaps_kappa():
    w = FdGrid(-1.0, 3.0, 101).nodes(1.0)
    assert 1.0 in w and w[-1] == 3.0 and abs(w[0] + 1.0) <= 0.5 * (w[1] - w[0])
    with pytest.raises(ValueError):
        FdGrid(1.0, 0.0, 10)


def test_fd_reports_non_convergence():
    params, spec = canonical("A")
    with pytest.raises(FdConvergenceError):
        fd_solve(params, spec, FdGrid(-1.0, 5.0, 201), max_iter=1)


def test_fd_rejects_grid_past_safe_level(sol_c):
    params, spec = canonical("C")
    with pytest.raises(ValueError):
        fd_solve(params, spec, FdGrid(-1.0, sol_c.w_safe + 1, 201))


def test_ode_residual_ignores_safe_region(sol_c):
    assert ode_residual(sol_c, [sol_c.w_safe, sol_c.w_safe + 1]) == 0.0
    assert ode_residual(sol_c, np.linspace(-2, 2.9, 200)) < 1e-12
