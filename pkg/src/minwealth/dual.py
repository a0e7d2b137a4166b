"""Concave dual of the ruin function and its five-constant boundary-value problem.

In dual coordinates ``y = -h'(w)`` the HJB becomes a linear Euler-type ODE on
two pieces: ``y > y_kappa`` (wealth below the kink) and ``0 < y < y_kappa``
(wealth above it).  The outer piece is

    ht(y) = D1 y^B1 + D2 y^B2 + A y,        A = (c_bar + rho*kappa) / r

and the inner piece is

    ht(y) = Dhat1 y^Bhat1 - e y,            e = c_bar / (rho - r)     (rho != r)
    ht(y) = Dhat1 y - a y log(y),           a = c_bar / (delta + lam) (rho == r)

The constants are pinned by ht'(y0) = 0, ht(y0) = 1, C^1 matching at y_kappa
(ht' = kappa from both sides) and value continuity at y_kappa.

Evaluation uses the coefficients rescaled to y_kappa, e.g. D1 y^B1 = P y_kappa
(y/y_kappa)^B1 with P = D1 y_kappa^(B1-1).  P, Q and R are O(1) even when D2 or
Dhat1 themselves fall outside the float64 range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import ConsumptionSpec, DerivedConstants, MarketParams, Regime, derive_constants
from .roots import RootFindingError, expand_bracket, newton_bisect

MAX_LOG_EXPONENT = 700.0


def _pow(y: NDArray[np.float64] | float, e: float) -> NDArray[np.float64] | float:
    """``y**e`` for ``y > 0`` evaluated as ``exp(e*log y)``.

    Exponents above the guard raise OverflowError; very negative ones underflow
    quietly to zero, which is the correct limit for every term that uses this.
    """
    z = e * np.log(y)
    if np.any(z > MAX_LOG_EXPONENT):
        raise OverflowError(f"power y**{e:.6g} leaves the representable range (e*log y > {MAX_LOG_EXPONENT})")
    with np.errstate(under="ignore"):
        return np.exp(z)


def _pow_or_inf(y: float, e: float) -> float:
    # display-only coefficients: saturate instead of raising
    z = e * math.log(y)
    return math.inf if z > MAX_LOG_EXPONENT else math.exp(z)


@dataclass(frozen=True)
class DualSolution:
    y0: float
    y_kappa: float
    D1: float
    D2: float
    Dhat1: float
    regime: Regime
    ratio: float
    P: float
    Q: float
    R: float

    def to_dict(self) -> dict[str, float | str]:
        return {
            "y0": self.y0,
            "y_kappa": self.y_kappa,
            "D1": self.D1,
            "D2": self.D2,
            "Dhat1": self.Dhat1,
            "regime": self.regime.value,
        }


def _floor_over_r(params_r: float, spec: ConsumptionSpec) -> float:
    return spec.floor_rate / params_r


def _inner_linear_coeff(consts: DerivedConstants, spec: ConsumptionSpec, r: float, lam: float) -> float:
    # e = c_bar/(rho - r) for rho != r, a = c_bar/(delta + lam) for rho == r
    if consts.regime is Regime.RHO_EQUAL:
        return spec.c_bar / (consts.delta + lam)
    return spec.c_bar / (spec.rho - r)


def _matching_coefficients(
    params: MarketParams, spec: ConsumptionSpec, consts: DerivedConstants
) -> tuple[float, float]:
    """Scaled outer coefficients ``P = D1 y_k^(B1-1)``, ``Q = D2 y_k^(B2-1)``.

    They follow from eliminating Dhat1 between the two matching conditions at
    y_kappa and do not depend on y_kappa itself.
    """
    A = _floor_over_r(params.r, spec)
    kappa = spec.kappa
    coeff = _inner_linear_coeff(consts, spec, params.r, params.lam)
    if consts.regime is Regime.RHO_EQUAL:
        G = kappa + coeff - A
    else:
        G = (kappa + coeff) / consts.Bhat1 - coeff - A
    H = kappa - A
    B1, B2 = consts.B1, consts.B2
    P = (H - B2 * G) / (B1 - B2)
    Q = (B1 * G - H) / (B1 - B2)
    return P, Q


def ratio_equation_lhs(
    x: float, params: MarketParams, spec: ConsumptionSpec, consts: DerivedConstants | None = None
) -> float:
    """Left-hand side of the equation for ``x = y0 / y_kappa``; the root solves ``lhs(x) = A``."""
    consts = consts or derive_constants(params, spec)
    P, Q = _matching_coefficients(params, spec, consts)
    B1, B2 = consts.B1, consts.B2
    return float(-(B1 * P * _pow(x, B1 - 1.0) + B2 * Q * _pow(x, B2 - 1.0)))


def _ratio_lhs_prime(x: float, P: float, Q: float, B1: float, B2: float) -> float:
    return float(-(B1 * (B1 - 1.0) * P * _pow(x, B1 - 2.0) + B2 * (B2 - 1.0) * Q * _pow(x, B2 - 2.0)))


def solve_ratio(params: MarketParams, spec: ConsumptionSpec, consts: DerivedConstants | None = None) -> float:
    """Unique root ``x* > 1`` of ``lhs(x) = (c_bar + rho*kappa)/r``.

    The search runs in ``t = ln x``: when ``B1`` is close to 1 the root can sit
    at ``x ~ 1e18`` or beyond, where doubling ``x`` would take too many steps and
    Newton in ``x`` is badly scaled. Doubling ``t`` squares ``x`` instead.
    Raises RootFindingError if no sign change is found.
    """
    consts = consts or derive_constants(params, spec)
    P, Q = _matching_coefficients(params, spec, consts)
    B1, B2 = consts.B1, consts.B2
    A = _floor_over_r(params.r, spec)

    def f(t: float) -> float:
        return float(-(B1 * P * _exp_checked((B1 - 1.0) * t) + B2 * Q * _exp_checked((B2 - 1.0) * t))) - A

    def fp(t: float) -> float:
        return float(-(B1 * (B1 - 1.0) * P * _exp_checked((B1 - 1.0) * t)
                       + B2 * (B2 - 1.0) * Q * _exp_checked((B2 - 1.0) * t)))

    lo, hi = expand_bracket(f, 0.0, 1.0, max_expansions=60)
    t = newton_bisect(f, fp, lo, hi, xtol=1e-15, maxiter=200)
    return math.exp(t)


def _exp_checked(z: float) -> float:
    if z > MAX_LOG_EXPONENT:
        raise OverflowError(f"exponent {z:.6g} leaves the representable range")
    return math.exp(z)


def solve_boundary_system(
    params: MarketParams, spec: ConsumptionSpec, consts: DerivedConstants | None = None
) -> DualSolution:
    consts = consts or derive_constants(params, spec)
    x = solve_ratio(params, spec, consts)
    P, Q = _matching_coefficients(params, spec, consts)
    B1, B2 = consts.B1, consts.B2
    A = _floor_over_r(params.r, spec)
    denom = P * _pow(x, B1 - 1.0) + Q * _pow(x, B2 - 1.0) + A
    if not denom > 0:
        raise RootFindingError(f"normalization gives a non-positive y0 (1/y0 = {denom:g})")
    y0 = 1.0 / denom
    yk = y0 / x
    D1 = P * _pow_or_inf(yk, 1.0 - B1)
    D2 = Q * _pow_or_inf(yk, 1.0 - B2)
    coeff = _inner_linear_coeff(consts, spec, params.r, params.lam)
    if consts.regime is Regime.RHO_EQUAL:
        Dhat1 = spec.kappa + coeff * (math.log(yk) + 1.0)
        R = Dhat1
    else:
        R = (spec.kappa + coeff) / consts.Bhat1
        Dhat1 = R * _pow_or_inf(yk, 1.0 - consts.Bhat1)
    return DualSolution(y0=float(y0), y_kappa=float(yk), D1=float(D1), D2=float(D2), Dhat1=float(Dhat1),
                        regime=consts.regime, ratio=float(x), P=float(P), Q=float(Q), R=float(R))


@dataclass(frozen=True)
class DualFunction:
    """Evaluator for the dual function and its first two derivatives (``y > 0``)."""

    sol: DualSolution
    consts: DerivedConstants
    spec: ConsumptionSpec
    r: float
    lam: float

    @property
    def A(self) -> float:
        return self.spec.floor_rate / self.r

    @property
    def inner_coeff(self) -> float:
        return _inner_linear_coeff(self.consts, self.spec, self.r, self.lam)

    def outer(self, y: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        """Outer branch (wealth below the kink) at any ``y > 0``."""
        y = np.asarray(y, dtype=np.float64)
        s, c = self.sol, self.consts
        z = y / s.y_kappa
        # p1 = D1 y^(B1-1), p2 = D2 y^(B2-1)
        p1 = s.P * _pow(z, c.B1 - 1.0)
        p2 = s.Q * _pow(z, c.B2 - 1.0)
        val = (p1 + p2 + self.A) * y
        d1 = c.B1 * p1 + c.B2 * p2 + self.A
        d2 = (c.B1 * (c.B1 - 1.0) * p1 + c.B2 * (c.B2 - 1.0) * p2) / y
        return val, d1, d2

    def inner(self, y: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        """Inner branch (wealth above the kink) at any ``y > 0``."""
        y = np.asarray(y, dtype=np.float64)
        s, c = self.sol, self.consts
        k = self.inner_coeff
        if c.regime is Regime.RHO_EQUAL:
            ly = np.log(y)
            val = s.Dhat1 * y - k * y * ly
            d1 = s.Dhat1 - k * (ly + 1.0)
            d2 = -k / y
        else:
            # p = Dhat1 y^(Bhat1-1)
            p = s.R * _pow(y / s.y_kappa, c.Bhat1 - 1.0)
            val = p * y - k * y
            d1 = c.Bhat1 * p - k
            d2 = c.Bhat1 * (c.Bhat1 - 1.0) * p / y
        return val, d1, d2

    def __call__(self, y: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        y = np.asarray(y, dtype=np.float64)
        if np.any(~(y > 0)):
            raise ValueError("dual variable must be positive")
        is_inner = y <= self.sol.y_kappa
        val = np.empty_like(y)
        d1 = np.empty_like(y)
        d2 = np.empty_like(y)
        if np.any(is_inner):
            v, a, b = self.inner(y[is_inner])
            val[is_inner], d1[is_inner], d2[is_inner] = v, a, b
        if np.any(~is_inner):
            v, a, b = self.outer(y[~is_inner])
            val[~is_inner], d1[~is_inner], d2[~is_inner] = v, a, b
        return val, d1, d2


def dual_eval(f: DualFunction, y: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
    return f(y)


def make_dual(params: MarketParams, spec: ConsumptionSpec) -> DualFunction:
    consts = derive_constants(params, spec)
    sol = solve_boundary_system(params, spec, consts)
    return DualFunction(sol=sol, consts=consts, spec=spec, r=params.r, lam=params.lam)


def boundary_residuals(f: DualFunction) -> dict[str, float]:
    """Relative residuals of the five defining conditions.

    Each entry is ``|sum of terms| / sum of |terms|`` for one condition.
    """
    s, c, A, kappa = f.sol, f.consts, f.A, f.spec.kappa
    y0, yk = s.y0, s.y_kappa

    def rel(*terms: float) -> float:
        scale = sum(abs(t) for t in terms)
        return abs(sum(terms)) / scale if scale > 0 else 0.0

    x = s.ratio
    p1_0, p2_0 = s.P * _pow(x, c.B1 - 1.0), s.Q * _pow(x, c.B2 - 1.0)
    out = {
        "y0_slope": rel(c.B1 * p1_0, c.B2 * p2_0, A),
        "y0_value": rel(p1_0 * y0, p2_0 * y0, A * y0, -1.0),
        "kink_slope_outer": rel(c.B1 * s.P, c.B2 * s.Q, A, -kappa),
    }
    k = f.inner_coeff
    if c.regime is Regime.RHO_EQUAL:
        ly = math.log(yk)
        out["kink_slope_inner"] = rel(s.Dhat1, -k * (ly + 1.0), -kappa)
        inner_terms = (s.Dhat1 * yk, -k * yk * ly)
    else:
        out["kink_slope_inner"] = rel(s.R * c.Bhat1, -k, -kappa)
        inner_terms = (s.R * yk, -k * yk)
    out["kink_value"] = rel(*inner_terms, -s.P * yk, -s.Q * yk, -A * yk)
    return {key: float(v) for key, v in out.items()}
