"""Market and consumption parameters, validation, and derived scalar constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray


class ParameterError(ValueError):
    """An input violates a model invariant."""


class Regime(str, Enum):
    """Branch of the closed-form solution, by consumption slope vs riskless rate."""

    RHO_GREATER = "RhoGreater"
    RHO_EQUAL = "RhoEqual"
    RHO_LESS = "RhoLess"


@dataclass(frozen=True)
class MarketParams:
    """Black-Scholes market plus hazard rate and consumption slope (all per year)."""

    r: float
    mu: float
    sigma: float
    lam: float
    rho: float

    @property
    def sharpe(self) -> float:
        return (self.mu - self.r) / self.sigma

    @property
    def merton_fraction(self) -> float:
        # (mu - r) / sigma^2, the recurring prefactor of every strategy formula
        return (self.mu - self.r) / self.sigma**2


@dataclass(frozen=True)
class ConsumptionSpec:
    """Piecewise-linear consumption ``c(w) = (c_bar + rho*kappa) + rho*(w - kappa)_+``."""

    c_bar: float
    kappa: float
    rho: float

    @property
    def floor_rate(self) -> float:
        """Consumption rate below the kink."""
        return self.c_bar + self.rho * self.kappa


@dataclass(frozen=True)
class SafeLevel:
    """Safe wealth level; ``value`` is None when no finite safe level exists."""

    value: float | None

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def upper(self) -> float:
        """The level as a float, +inf when unbounded (for comparisons only)."""
        return math.inf if self.value is None else self.value

    def __repr__(self) -> str:
        return "SafeLevel(unbounded)" if self.value is None else f"SafeLevel({self.value!r})"


@dataclass(frozen=True)
class DerivedConstants:
    delta: float
    B1: float
    B2: float
    Bhat1: float | None
    Bhat2: float | None
    d: float | None
    w_safe: SafeLevel
    regime: Regime


def validate(params: MarketParams, spec: ConsumptionSpec) -> tuple[MarketParams, ConsumptionSpec]:
    """Return ``(params, spec)`` unchanged, or raise ParameterError naming the first violation."""
    vals = (params.r, params.mu, params.sigma, params.lam, params.rho,
            spec.c_bar, spec.kappa, spec.rho)
    if not all(math.isfinite(v) for v in vals):
        raise ParameterError("all parameters must be finite")
    if params.r <= 0:
        raise ParameterError("r must be positive")
    if params.mu <= params.r:
        raise ParameterError("mu must exceed r")
    if params.sigma <= 0:
        raise ParameterError("sigma must be positive")
    if params.lam <= 0:
        raise ParameterError("lambda must be positive")
    if params.rho <= 0:
        raise ParameterError("rho must be positive")
    if spec.rho != params.rho:
        raise ParameterError("consumption rho must equal market rho")
    if spec.kappa <= 0:
        raise ParameterError("kappa must be positive")
    if spec.floor_rate <= 0:
        raise ParameterError("c_bar + rho*kappa must be positive")
    if spec.floor_rate <= params.r * spec.kappa:
        raise ParameterError("c_bar + rho*kappa must exceed r*kappa")
    return params, spec


def consumption_rate(spec: ConsumptionSpec, w: ArrayLike) -> NDArray[np.float64] | float:
    w_arr = np.asarray(w, dtype=np.float64)
    out = spec.floor_rate + spec.rho * np.maximum(w_arr - spec.kappa, 0.0)
    return float(out) if out.ndim == 0 else out


def safe_level(spec: ConsumptionSpec, r: float) -> SafeLevel:
    if spec.rho >= r:
        return SafeLevel(None)
    return SafeLevel(spec.c_bar / (r - spec.rho))


def regime_of(r: float, rho: float) -> Regime:
    if rho > r:
        return Regime.RHO_GREATER
    if rho < r:
        return Regime.RHO_LESS
    return Regime.RHO_EQUAL


def quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots (positive, negative) of ``a x^2 + b x + c`` with ``a > 0 > c``.

    Uses the cancellation-free form: larger-magnitude root first, the other
    from the product ``c / a``.
    """
    disc = b * b - 4.0 * a * c
    sgn = 1.0 if b >= 0 else -1.0
    q = -0.5 * (b + sgn * math.sqrt(disc))
    x1 = q / a
    x2 = c / q
    return (x1, x2) if x1 > x2 else (x2, x1)


def exponent_d(r: float, rho: float, lam: float, delta: float) -> float:
    """Closed-form exponent of the outer power law (requires ``rho != r``)."""
    s = r - rho + lam + delta
    return (s + math.sqrt(s * s + 4.0 * (rho - r) * lam)) / (2.0 * (r - rho))


def derive_constants(params: MarketParams, spec: ConsumptionSpec) -> DerivedConstants:
    validate(params, spec)
    r, lam, rho = params.r, params.lam, params.rho
    delta = 0.5 * params.sharpe**2
    B1, B2 = quadratic_roots(delta, -(r - lam + delta), -lam)
    regime = regime_of(r, rho)
    if regime is Regime.RHO_EQUAL:
        Bhat1 = Bhat2 = d = None
    else:
        Bhat1, Bhat2 = quadratic_roots(delta, -(r - rho - lam + delta), -lam)
        d = Bhat1 / (Bhat1 - 1.0)
    return DerivedConstants(
        delta=delta, B1=B1, B2=B2, Bhat1=Bhat1, Bhat2=Bhat2, d=d,
        w_safe=safe_level(spec, r), regime=regime,
    )
