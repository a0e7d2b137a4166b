"""Primal ruin function ``h``, ruin probability ``psi(w; b) = h(w)/h(b)`` and the optimal strategy.

Below the kink ``h`` is recovered from the dual by ``h(w) = ht(y) - w*y`` with
``ht'(y) = w``; above it ``h`` has a closed form (power law, or exponential
when ``rho == r``) whose single constant is fixed by value matching at kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dual import DualFunction, make_dual
from .model import ConsumptionSpec, DerivedConstants, MarketParams, Regime, consumption_rate


class DomainError(ValueError):
    pass


def _as_array(x: ArrayLike) -> tuple[NDArray[np.float64], bool]:
    arr = np.asarray(x, dtype=np.float64)
    return np.atleast_1d(arr), arr.ndim == 0


def _unwrap(arr: NDArray[np.float64], scalar: bool):
    return float(arr[0]) if scalar else arr


@dataclass(frozen=True)
class RuinSolution:
    params: MarketParams
    spec: ConsumptionSpec
    dual: DualFunction
    h_kappa: float = field(init=False)

    def __post_init__(self) -> None:
        yk = self.dual.sol.y_kappa
        object.__setattr__(self, "h_kappa", float(self.dual.inner(yk)[0]) - self.spec.kappa * yk)

    @property
    def consts(self) -> DerivedConstants:
        return self.dual.consts

    @property
    def regime(self) -> Regime:
        return self.consts.regime

    @property
    def w_safe(self) -> float:
        """Safe level as a float (+inf when unbounded)."""
        return self.consts.w_safe.upper()

    @property
    def K_outer(self) -> float:
        """Coefficient of the closed form above kappa; may overflow to inf for extreme exponents."""
        c, s = self.consts, self.spec
        if c.regime is Regime.RHO_EQUAL:
            log_shape = -(c.delta + self.params.lam) / s.c_bar * s.kappa
        elif c.regime is Regime.RHO_GREATER:
            log_shape = c.d * math.log(s.kappa + s.c_bar / (s.rho - self.params.r))
        else:
            log_shape = c.d * math.log(self.w_safe - s.kappa)
        log_k = math.log(self.h_kappa) - log_shape
        return math.exp(log_k) if log_k < 709.0 else math.inf


def solve(params: MarketParams, spec: ConsumptionSpec) -> RuinSolution:
    return RuinSolution(params=params, spec=spec, dual=make_dual(params, spec))


def invert_dual(sol: RuinSolution, w: ArrayLike, *, maxiter: int = 200):
    """Solve ``ht'(y) = w`` on the outer branch (``y > y_kappa``) for each ``w < kappa``.

    Vectorized Newton iteration in ``log y``, safeguarded by a per-element
    bracket that starts at ``y_kappa`` and expands geometrically.
    """
    w_arr, scalar = _as_array(w)
    kappa = sol.spec.kappa
    if np.any(~(w_arr < kappa)):
        raise DomainError("invert_dual requires w < kappa")
    f = sol.dual
    yk = f.sol.y_kappa

    # bracket: g(lo) > 0 >= g(hi) since ht' decreases in y
    lo = np.full_like(w_arr, yk)
    hi = np.full_like(w_arr, 2.0 * yk)
    for _ in range(200):
        bad = f.outer(hi)[1] - w_arr > 0
        if not np.any(bad):
            break
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, hi * 2.0, hi)
    else:
        raise DomainError("could not bracket the dual variable")

    y = np.sqrt(lo * hi)
    for _ in range(maxiter):
        _, d1, d2 = f.outer(y)
        gy = d1 - w_arr
        lo = np.where(gy > 0, y, lo)
        hi = np.where(gy <= 0, y, hi)
        # Newton in t = log y: dg/dt = y * ht''(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_new = y * np.exp(-gy / (y * d2))
        outside = ~((y_new > lo) & (y_new < hi))
        y_new = np.where(outside, np.sqrt(lo * hi), y_new)
        done = np.abs(y_new - y) <= 4.0 * np.spacing(y)
        y = y_new
        if np.all(done):
            break
    return _unwrap(y, scalar)


def h_eval(sol: RuinSolution, w: ArrayLike):
    """``(h, h', h'')`` at each wealth level; total on the real line."""
    w_arr, scalar = _as_array(w)
    h = np.zeros_like(w_arr)
    h1 = np.zeros_like(w_arr)
    h2 = np.zeros_like(w_arr)
    kappa, ws = sol.spec.kappa, sol.w_safe
    below = w_arr < kappa
    if np.any(below):
        wb = w_arr[below]
        y = np.atleast_1d(invert_dual(sol, wb))
        val, _, d2 = sol.dual.outer(y)
        h[below] = val - wb * y
        h1[below] = -y
        h2[below] = -1.0 / d2
    mid = (w_arr >= kappa) & (w_arr < ws)
    if np.any(mid):
        wm = w_arr[mid]
        c, s, hk = sol.consts, sol.spec, sol.h_kappa
        # shapes are normalised to 1 at kappa so no intermediate constant can overflow
        if c.regime is Regime.RHO_EQUAL:
            a = (c.delta + sol.params.lam) / s.c_bar
            base = hk * np.exp(-a * (wm - kappa))
            h[mid], h1[mid], h2[mid] = base, -a * base, a * a * base
        else:
            if c.regime is Regime.RHO_GREATER:
                z0 = kappa + s.c_bar / (s.rho - sol.params.r)
                z, sign = (wm + s.c_bar / (s.rho - sol.params.r)) / z0, 1.0
            else:
                z0 = ws - kappa
                z, sign = (ws - wm) / z0, -1.0
            with np.errstate(under="ignore", over="ignore"):
                pz = hk * z ** (c.d - 2.0)
            h[mid] = pz * z * z
            h1[mid] = sign * c.d * pz * z / z0
            h2[mid] = c.d * (c.d - 1.0) * pz / (z0 * z0)
    return _unwrap(h, scalar), _unwrap(h1, scalar), _unwrap(h2, scalar)


def h_value(sol: RuinSolution, w: ArrayLike):
    return h_eval(sol, w)[0]


def psi(sol: RuinSolution, w: ArrayLike, b: float):
    """Minimum probability that wealth started at ``w`` reaches ``b`` before death."""
    if not b < sol.w_safe:
        raise DomainError("ruin level b must be below the safe level")
    w_arr, scalar = _as_array(w)
    if np.any(w_arr < b):
        raise DomainError("psi requires w >= b")
    out = h_value(sol, w_arr) / h_value(sol, b)
    out = np.where(w_arr == b, 1.0, out)
    return _unwrap(np.clip(out, 0.0, 1.0), scalar)


def pi_star(sol: RuinSolution, w: ArrayLike):
    """Optimal amount held in the risky asset; independent of the ruin level."""
    w_arr, scalar = _as_array(w)
    if np.any(~(w_arr < sol.w_safe)):
        raise DomainError("strategy is undefined at or above the safe level")
    m = sol.params.merton_fraction
    out = np.empty_like(w_arr)
    kappa = sol.spec.kappa
    below = w_arr < kappa
    if np.any(below):
        y = np.atleast_1d(invert_dual(sol, w_arr[below]))
        out[below] = -m * y * sol.dual.outer(y)[2]
    if np.any(~below):
        out[~below] = outer_strategy(sol, w_arr[~below])
    return _unwrap(out, scalar)


def outer_strategy(sol: RuinSolution, w: ArrayLike) -> NDArray[np.float64]:
    """Closed-form strategy on ``(kappa, w_safe)``: linear in wealth, or constant when ``rho == r``."""
    w = np.asarray(w, dtype=np.float64)
    c, s, p = sol.consts, sol.spec, sol.params
    m = p.merton_fraction
    if c.regime is Regime.RHO_EQUAL:
        return np.full_like(w, m * s.c_bar / (c.delta + p.lam))
    return m * (w + s.c_bar / (s.rho - p.r)) / (1.0 - c.d)


def pi_from_derivatives(sol: RuinSolution, w: ArrayLike):
    """``-(mu - r)/sigma^2 * h'/h''``, the first-order condition form of the strategy."""
    _, h1, h2 = h_eval(sol, w)
    return -sol.params.merton_fraction * np.asarray(h1) / np.asarray(h2)


def hjb_residual(sol: RuinSolution, w: ArrayLike) -> NDArray[np.float64]:
    """Pointwise ``lambda*h - (r*w - c(w))*h' + delta*h'^2/h''`` (zero for the exact solution)."""
    w = np.asarray(w, dtype=np.float64)
    h, h1, h2 = (np.asarray(a) for a in h_eval(sol, w))
    if np.any(h2 <= 0):
        raise DomainError("h'' <= 0: convexity violated")
    drift = sol.params.r * w - consumption_rate(sol.spec, w)
    return sol.params.lam * h - drift * h1 + sol.consts.delta * h1 * h1 / h2
