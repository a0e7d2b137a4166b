import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import solve_banded
from scipy.special import ndtri

from minwealth import kernels
from minwealth._accel import HAVE_NUMBA
from minwealth.verify import build_policy

from conftest import solved

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def test_uniform_stream_is_a_pure_function_of_counter():
    keys = kernels.path_keys_np(123, np.arange(1000))
    a = kernels.uniform01_np(keys, 7)
    b = kernels.uniform01_np(keys, 7)
    assert np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))
    assert not np.array_equal(a, kernels.uniform01_np(keys, 8))
    assert not np.array_equal(keys, kernels.path_keys_np(124, np.arange(1000)))
    # crude uniformity
    big = kernels.uniform01_np(kernels.path_keys_np(5, np.arange(200_000)), 0)
    assert abs(big.mean() - 0.5) < 3e-3
    assert abs(big.var() - 1 / 12) < 1e-3


@needs_numba
def test_compiled_and_numpy_streams_match():
    keys = kernels.path_keys_np(99, np.arange(50))
    for i, key in enumerate(keys):
        assert kernels.path_key(np.uint64(99), i) == key
        for counter in (0, 1, 2**40):
            assert kernels.uniform01(key, counter) == kernels.uniform01_np(np.array([key]), counter)[0]


def test_normal_quantile_matches_scipy():
    p = np.concatenate((np.linspace(1e-12, 1 - 1e-12, 20001), [1e-300, 1e-20, 0.5, 1 - 1e-16]))
    ref = ndtri(p)
    assert np.max(np.abs(kernels.normal_quantile_np(p) - ref) / np.maximum(1.0, np.abs(ref))) < 1e-14
    fn = kernels.normal_quantile
    for x in p[::997]:
        assert fn(x) == pytest.approx(float(ndtri(x)), rel=1e-14, abs=1e-15)


def test_tridiagonal_solvers():
    rng = np.random.default_rng(0)
    n = 500
    # full-length bands; lower[0] and upper[-1] are ignored
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    ab = np.zeros((3, n))
    ab[0, 1:], ab[1], ab[2, :-1] = upper[:-1], diag, lower[1:]
    ref = solve_banded((1, 1), ab, rhs)
    for solver in (kernels.thomas_numba, kernels.thomas_numpy):
        assert np.allclose(solver(lower, diag, upper, rhs), ref, rtol=1e-12, atol=1e-14)


def test_policy_lookup_matches_closed_form():
    from minwealth import pi_star

    for case in "ABC":
        sol = solved(case)
        pol, table = build_policy(sol, -3.0)
        hi = min(sol.w_safe - 1e-3, 8.0)
        w = np.linspace(-6.0, hi, 2001)
        ref = pi_star(sol, w)
        got = kernels.policy_np(w, pol, table)
        assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-7
        deep = w[w < -3.0][::50]
        for x in deep:
            assert kernels.policy_scalar(x, pol, table) == pytest.approx(pi_star(sol, x), rel=1e-12)


@needs_numba
@pytest.mark.parametrize("case", "AC")
def test_backends_agree_on_paths(case):
    sol = solved(case)
    pol, table = build_policy(sol, -1.0)
    args = (pol, table, 2024, 300, 2.0, 0.0, 1 / 50, 200.0, 5.0)
    pay_nb, cap_nb = kernels.ruin_paths_numba(*args)
    pay_np, cap_np = kernels.ruin_paths_numpy(*args)
    assert np.array_equal(cap_nb, cap_np)
    assert np.allclose(pay_nb, pay_np, rtol=1e-12, atol=1e-15)
    pol, table = build_policy(sol, -28.0, n_nodes=262145)
    margs = (pol, table, 77, 300, 2.0, 1.5, 1 / 50, 200.0)
    m_nb, c_nb = kernels.minimum_paths_numba(*margs)
    m_np, c_np = kernels.minimum_paths_numpy(*margs)
    assert np.array_equal(c_nb, c_np)
    assert np.allclose(m_nb, m_np, rtol=1e-12, atol=1e-12)


def test_environment_flag_selects_numpy_backend():
    code = "import minwealth._accel as a, minwealth.kernels as k; print(a.backend_name(), k.ruin_paths is k.ruin_paths_numpy)"
    env = {"MINWEALTH_DISABLE_NUMBA": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
