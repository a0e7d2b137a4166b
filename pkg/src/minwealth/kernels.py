"""Hot inner loops: Euler-Maruyama path simulation and tridiagonal solves.

Every kernel exists twice: a scalar-loop version compiled with numba and a
vectorized numpy version.  ``_accel.USE_NUMBA`` picks the one the library
calls; both are importable so they can be benchmarked and cross-checked.

Random numbers come from a counter-based generator (splitmix64 finalizer):
the normal used by path ``i`` at step ``n`` is a pure function of
``(seed, i, n)``, obtained by inverse CDF from a single uniform.  Results
therefore do not depend on path ordering or on the backend.

Numba helpers called once per Euler step take scalars only: passing arrays
across an njit call boundary costs reference-count traffic that dominated
the step time.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from ._accel import USE_NUMBA, njit

_MASK64 = (1 << 64) - 1
_GOLDEN_INT = 0x9E3779B97F4A7C15
_GOLDEN = np.uint64(_GOLDEN_INT)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ROULETTE_SALT = np.uint64(0x5851F42D4C957F2D)
_DEATH_SALT = np.uint64(0x2545F4914F6CDD1D)
_INV_2_53 = 1.0 / 9007199254740992.0

# layout of the float64 policy vector shared by all simulation kernels
(P_R, P_EXCESS, P_SIGMA, P_LAM, P_CFLOOR, P_RHO, P_KAPPA, P_WSAFE, P_REGIME,
 P_MERTON, P_SHIFT, P_D, P_CONST_PI, P_TAB_LO, P_TAB_DW, P_P, P_Q, P_B1, P_B2,
 P_A, P_Z0) = range(21)
POLICY_LEN = 21

REGIME_GREATER, REGIME_EQUAL, REGIME_LESS = 0.0, 1.0, 2.0


# ---------------------------------------------------------------------------
# counter-based random numbers
# ---------------------------------------------------------------------------

@njit
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def path_key(seed, i):
    return mix64(mix64(seed) ^ ((np.uint64(i) + np.uint64(1)) * _GOLDEN))


@njit
def uniform01(key, counter):
    """Uniform on the open interval (0, 1)."""
    x = mix64(key + np.uint64(counter) * _GOLDEN)
    return (float(x >> _S11) + 0.5) * _INV_2_53


def mix64_np(z: NDArray[np.uint64]) -> NDArray[np.uint64]:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def path_keys_np(seed: int, idx: NDArray[np.int64]) -> NDArray[np.uint64]:
    s = mix64_np(np.array([seed], dtype=np.uint64))[0]
    return mix64_np(s ^ ((idx.astype(np.uint64) + np.uint64(1)) * _GOLDEN))


def uniform01_np(keys: NDArray[np.uint64], counter: int) -> NDArray[np.float64]:
    # the counter product wraps modulo 2^64 exactly as the compiled version does
    offset = np.uint64((int(counter) * _GOLDEN_INT) & _MASK64)
    x = mix64_np(keys + offset)
    return ((x >> _S11).astype(np.float64) + 0.5) * _INV_2_53


# Wichura's AS241 rational approximations to the standard normal quantile
_NA = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
       1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
       3.3430575583588128105e4, 2.5090809287301226727e3)
_NB = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
       2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
       5.2264952788528545610e3)
_NC = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
       3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
       2.27238449892691845833e-2, 7.74545014278341407640e-4)
_ND = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
       1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
       1.05075007164441684324e-9)
_NE = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
       2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
       2.71155556874348757815e-5, 2.01033439929228813265e-7)
_NF = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
       7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
       2.04426310338993978564e-15)


@njit
def _poly8(x, c0, c1, c2, c3, c4, c5, c6, c7):
    return ((((((c7 * x + c6) * x + c5) * x + c4) * x + c3) * x + c2) * x + c1) * x + c0


@njit
def normal_quantile(p):
    """Standard normal quantile for ``0 < p < 1`` (relative error ~1e-16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        t = 0.180625 - q * q
        return q * _poly8(t, *_NA) / _poly8(t, *_NB)
    t = p if q < 0.0 else 1.0 - p
    t = math.sqrt(-math.log(t))
    if t <= 5.0:
        t -= 1.6
        z = _poly8(t, *_NC) / _poly8(t, *_ND)
    else:
        t -= 5.0
        z = _poly8(t, *_NE) / _poly8(t, *_NF)
    return -z if q < 0.0 else z


def _poly8_np(c, x):
    return ((((((c[7] * x + c[6]) * x + c[5]) * x + c[4]) * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0]


def normal_quantile_np(p: NDArray[np.float64]) -> NDArray[np.float64]:
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    t = 0.180625 - q[central] ** 2
    out[central] = q[central] * _poly8_np(_NA, t) / _poly8_np(_NB, t)
    tail = ~central
    if np.any(tail):
        qt = q[tail]
        t = np.sqrt(-np.log(np.where(qt < 0.0, p[tail], 1.0 - p[tail])))
        mid = t <= 5.0
        z = np.empty_like(t)
        tm = t[mid] - 1.6
        z[mid] = _poly8_np(_NC, tm) / _poly8_np(_ND, tm)
        te = t[~mid] - 5.0
        z[~mid] = _poly8_np(_NE, te) / _poly8_np(_NF, te)
        out[tail] = np.where(qt < 0.0, -z, z)
    return out


# ---------------------------------------------------------------------------
# policy evaluation
# ---------------------------------------------------------------------------

@njit
def pi_exact_below(w, P, Q, B1, B2, A, z0, merton):
    """Strategy below the table range.

    Solves the outer first-order condition in the scaled variable ``z = y/y_kappa``
    (``P``, ``Q`` are the outer coefficients rescaled to y_kappa; the bracket starts at ``z0 = 1``).
    """
    lo = z0
    hi = 2.0 * z0
    while P * B1 * hi ** (B1 - 1.0) + Q * B2 * hi ** (B2 - 1.0) + A - w > 0.0:
        lo = hi
        hi *= 2.0
    y = math.sqrt(lo * hi)
    for _ in range(200):
        p1 = y ** (B1 - 1.0)
        p2 = y ** (B2 - 1.0)
        g = P * B1 * p1 + Q * B2 * p2 + A - w
        yd2 = P * B1 * (B1 - 1.0) * p1 + Q * B2 * (B2 - 1.0) * p2
        if g > 0.0:
            lo = y
        else:
            hi = y
        y_new = y * math.exp(-g / yd2) if yd2 != 0.0 else -1.0
        if not (lo < y_new < hi):
            y_new = math.sqrt(lo * hi)
        if abs(y_new - y) <= 4e-16 * y:
            y = y_new
            break
        y = y_new
    p1 = y ** (B1 - 1.0)
    p2 = y ** (B2 - 1.0)
    return -merton * (P * B1 * (B1 - 1.0) * p1 + Q * B2 * (B2 - 1.0) * p2)


@njit
def policy_scalar(w, pol, table):
    """Strategy at one wealth level (convenience entry point, not used in the step loops)."""
    if w >= pol[P_KAPPA]:
        if pol[P_REGIME] == REGIME_EQUAL:
            return pol[P_CONST_PI]
        return pol[P_MERTON] * (w + pol[P_SHIFT]) / (1.0 - pol[P_D])
    lo = pol[P_TAB_LO]
    if w < lo:
        return pi_exact_below(w, pol[P_P], pol[P_Q], pol[P_B1], pol[P_B2], pol[P_A], pol[P_Z0], pol[P_MERTON])
    x = (w - lo) / pol[P_TAB_DW]
    i = min(int(x), table.shape[0] - 2)
    return table[i] + (x - i) * (table[i + 1] - table[i])


def policy_np(w: NDArray, pol: NDArray, table: NDArray) -> NDArray:
    out = np.empty_like(w)
    above = w >= pol[P_KAPPA]
    if pol[P_REGIME] == REGIME_EQUAL:
        out[above] = pol[P_CONST_PI]
    else:
        out[above] = pol[P_MERTON] * (w[above] + pol[P_SHIFT]) / (1.0 - pol[P_D])
    lo = pol[P_TAB_LO]
    deep = (~above) & (w < lo)
    tab = (~above) & (w >= lo)
    if np.any(tab):
        x = (w[tab] - lo) * (1.0 / pol[P_TAB_DW])
        i = np.minimum(x.astype(np.int64), table.shape[0] - 2)
        out[tab] = table[i] + (x - i) * (table[i + 1] - table[i])
    if np.any(deep):
        f = getattr(pi_exact_below, "py_func", pi_exact_below)
        args = (pol[P_P], pol[P_Q], pol[P_B1], pol[P_B2], pol[P_A], pol[P_Z0], pol[P_MERTON])
        out[deep] = [f(float(v), *args) for v in w[deep]]
    return out


# ---------------------------------------------------------------------------
# ruin probability via discounted hitting time
# ---------------------------------------------------------------------------

@njit
def ruin_paths_numba(pol, table, seed, n_paths, w0, b, dt, horizon_cap, roulette_every):
    """Per-path discounted hitting indicators; see ``ruin_paths_numpy`` for the contract."""
    payoff = np.zeros(n_paths)
    capped = np.zeros(n_paths, dtype=np.bool_)
    if w0 <= b:
        payoff[:] = 1.0
        return payoff, capped
    r, excess, sigma, lam = pol[P_R], pol[P_EXCESS], pol[P_SIGMA], pol[P_LAM]
    cfloor, rho, kappa, ws = pol[P_CFLOOR], pol[P_RHO], pol[P_KAPPA], pol[P_WSAFE]
    if w0 >= ws:
        return payoff, capped
    is_equal = pol[P_REGIME] == REGIME_EQUAL
    const_pi, shift = pol[P_CONST_PI], pol[P_SHIFT]
    slope = pol[P_MERTON] / (1.0 - pol[P_D])
    tab_lo, inv_dw, tab_last = pol[P_TAB_LO], 1.0 / pol[P_TAB_DW], table.shape[0] - 2
    P, Q, B1, B2, A, z0, merton = pol[P_P], pol[P_Q], pol[P_B1], pol[P_B2], pol[P_A], pol[P_Z0], pol[P_MERTON]
    sqdt = math.sqrt(dt)
    survive = math.exp(-lam * roulette_every)
    seed_u = np.uint64(seed)
    for i in range(n_paths):
        key = path_key(seed_u, i)
        rkey = mix64(key ^ _ROULETTE_SALT)
        w = w0
        n = 0
        t_last = 0.0
        next_check = roulette_every
        k = 0
        while True:
            if w >= kappa:
                pi = const_pi if is_equal else slope * (w + shift)
                c = cfloor + rho * (w - kappa)
            elif w >= tab_lo:
                x = (w - tab_lo) * inv_dw
                j = min(int(x), tab_last)
                pi = table[j] + (x - j) * (table[j + 1] - table[j])
                c = cfloor
            else:
                pi = pi_exact_below(w, P, Q, B1, B2, A, z0, merton)
                c = cfloor
            z = normal_quantile(uniform01(key, n))
            w = w + (r * w - c + excess * pi) * dt + sigma * pi * sqdt * z
            n += 1
            t = n * dt
            if w <= b:
                payoff[i] = math.exp(-lam * (t - t_last))
                break
            if w >= ws:
                break
            if t >= horizon_cap:
                capped[i] = True
                break
            if t >= next_check:
                if uniform01(rkey, k) > survive:
                    break
                k += 1
                t_last = next_check
                next_check += roulette_every
    return payoff, capped


def ruin_paths_numpy(pol, table, seed, n_paths, w0, b, dt, horizon_cap, roulette_every):
    """Per-path payoff ``exp(-lam*(tau_b - t_last))`` if ``b`` is hit first, else 0.

    ``t_last`` is the most recent roulette checkpoint the path survived:
    every ``roulette_every`` years a path continues with probability
    ``exp(-lam*roulette_every)``, which keeps the estimator unbiased for
    ``E[exp(-lam*tau_b) 1{tau_b < tau_safe}]`` while bounding path length.
    Returns ``(payoff, capped)``; capped marks paths stopped by ``horizon_cap``.
    """
    payoff = np.zeros(n_paths)
    capped = np.zeros(n_paths, dtype=bool)
    if w0 <= b:
        payoff[:] = 1.0
        return payoff, capped
    ws = pol[P_WSAFE]
    if w0 >= ws:
        return payoff, capped
    r, excess, sigma, lam = pol[P_R], pol[P_EXCESS], pol[P_SIGMA], pol[P_LAM]
    cfloor, rho, kappa = pol[P_CFLOOR], pol[P_RHO], pol[P_KAPPA]
    sqdt = math.sqrt(dt)
    survive = math.exp(-lam * roulette_every)
    idx = np.arange(n_paths, dtype=np.int64)
    keys = path_keys_np(seed, idx)
    rkeys = mix64_np(keys ^ _ROULETTE_SALT)
    w = np.full(n_paths, float(w0))
    t_last = 0.0
    k = 0
    next_check = roulette_every
    n = 0
    while idx.size:
        pi = policy_np(w, pol, table)
        c = np.where(w >= kappa, cfloor + rho * (w - kappa), cfloor)
        z = normal_quantile_np(uniform01_np(keys, n))
        w = w + (r * w - c + excess * pi) * dt + sigma * pi * sqdt * z
        n += 1
        t = n * dt
        hit = w <= b
        payoff[idx[hit]] = math.exp(-lam * (t - t_last))
        stop = hit | (w >= ws)
        if t >= horizon_cap:
            capped[idx[~stop]] = True
            break
        if t >= next_check:
            # checkpoints are common to all paths, so every survivor draws its k-th uniform
            stop = stop | (uniform01_np(rkeys, k) > survive)
            k += 1
            t_last = next_check
            next_check += roulette_every
        keep = ~stop
        idx, keys, rkeys, w = idx[keep], keys[keep], rkeys[keep], w[keep]
    return payoff, capped


# ---------------------------------------------------------------------------
# lifetime minimum with sampled death time
# ---------------------------------------------------------------------------

@njit
def minimum_paths_numba(pol, table, seed, n_paths, w0, m0, dt, horizon_cap):
    """Running minimum at an exponential death time; see ``minimum_paths_numpy``."""
    minima = np.full(n_paths, min(m0, w0))
    capped = np.zeros(n_paths, dtype=np.bool_)
    r, excess, sigma, lam = pol[P_R], pol[P_EXCESS], pol[P_SIGMA], pol[P_LAM]
    cfloor, rho, kappa, ws = pol[P_CFLOOR], pol[P_RHO], pol[P_KAPPA], pol[P_WSAFE]
    if w0 >= ws:
        return minima, capped
    is_equal = pol[P_REGIME] == REGIME_EQUAL
    const_pi, shift = pol[P_CONST_PI], pol[P_SHIFT]
    slope = pol[P_MERTON] / (1.0 - pol[P_D])
    tab_lo, inv_dw, tab_last = pol[P_TAB_LO], 1.0 / pol[P_TAB_DW], table.shape[0] - 2
    P, Q, B1, B2, A, z0, merton = pol[P_P], pol[P_Q], pol[P_B1], pol[P_B2], pol[P_A], pol[P_Z0], pol[P_MERTON]
    seed_u = np.uint64(seed)
    sqdt = math.sqrt(dt)
    for i in range(n_paths):
        key = path_key(seed_u, i)
        tau = -math.log(uniform01(mix64(key ^ _DEATH_SALT), 0)) / lam
        w = w0
        m = minima[i]
        n = 0
        while True:
            t = n * dt
            if t >= tau:
                break
            if t >= horizon_cap:
                capped[i] = True
                break
            if w >= kappa:
                pi = const_pi if is_equal else slope * (w + shift)
                c = cfloor + rho * (w - kappa)
            elif w >= tab_lo:
                x = (w - tab_lo) * inv_dw
                j = min(int(x), tab_last)
                pi = table[j] + (x - j) * (table[j + 1] - table[j])
                c = cfloor
            else:
                pi = pi_exact_below(w, P, Q, B1, B2, A, z0, merton)
                c = cfloor
            z = normal_quantile(uniform01(key, n))
            if tau - t < dt:
                h = tau - t
                w = w + (r * w - c + excess * pi) * h + sigma * pi * math.sqrt(h) * z
            else:
                w = w + (r * w - c + excess * pi) * dt + sigma * pi * sqdt * z
            n += 1
            if w < m:
                m = w
            if w >= ws:
                break
        minima[i] = m
    return minima, capped


def minimum_paths_numpy(pol, table, seed, n_paths, w0, m0, dt, horizon_cap):
    """Lifetime minimum wealth ``min(m0, min_{t <= tau_d} W_t)`` per path.

    ``tau_d`` is drawn by inverse CDF from a dedicated per-path stream; the
    last Euler step is shortened to land exactly on it.  Wealth reaching the
    safe level stays there, so the minimum is frozen.
    """
    ws = pol[P_WSAFE]
    r, excess, sigma, lam = pol[P_R], pol[P_EXCESS], pol[P_SIGMA], pol[P_LAM]
    cfloor, rho, kappa = pol[P_CFLOOR], pol[P_RHO], pol[P_KAPPA]
    idx = np.arange(n_paths, dtype=np.int64)
    keys = path_keys_np(seed, idx)
    tau = -np.log(uniform01_np(mix64_np(keys ^ _DEATH_SALT), 0)) / lam
    minima = np.full(n_paths, min(m0, w0))
    capped = np.zeros(n_paths, dtype=bool)
    if w0 >= ws:
        return minima, capped
    w = np.full(n_paths, float(w0))
    m = minima.copy()
    n = 0
    sqdt = math.sqrt(dt)
    while idx.size:
        t = n * dt
        alive = t < tau
        if t >= horizon_cap:
            capped[idx[alive]] = True
            minima[idx] = m
            break
        minima[idx[~alive]] = m[~alive]
        idx, keys, tau, w, m = idx[alive], keys[alive], tau[alive], w[alive], m[alive]
        if not idx.size:
            break
        pi = policy_np(w, pol, table)
        c = np.where(w >= kappa, cfloor + rho * (w - kappa), cfloor)
        z = normal_quantile_np(uniform01_np(keys, n))
        short = tau - t < dt
        h = np.where(short, tau - t, dt)
        vol = np.where(short, np.sqrt(h), sqdt)
        w = w + (r * w - c + excess * pi) * h + sigma * pi * vol * z
        n += 1
        m = np.minimum(m, w)
        safe = w >= ws
        if np.any(safe):
            minima[idx[safe]] = m[safe]
            keep = ~safe
            idx, keys, tau, w, m = idx[keep], keys[keep], tau[keep], w[keep], m[keep]
    return minima, capped


# ---------------------------------------------------------------------------
# tridiagonal solve
# ---------------------------------------------------------------------------

@njit
def thomas_numba(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def thomas_numpy(lower, diag, upper, rhs):
    from scipy.linalg import solve_banded

    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


ruin_paths = ruin_paths_numba if USE_NUMBA else ruin_paths_numpy
minimum_paths = minimum_paths_numba if USE_NUMBA else minimum_paths_numpy
solve_tridiagonal = thomas_numba if USE_NUMBA else thomas_numpy
