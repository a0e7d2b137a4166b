"""Minimum expected penalty of lifetime minimum wealth.

Because the optimal strategy does not depend on the penalty, the value of
any nonincreasing nonnegative penalty ``f`` is a mixture of ruin
probabilities:

    V(w, m) = f(m) - int_{-inf}^{m} f'(x) h(w)/h(x) dx

with ``f'`` understood as a distribution.  Penalties are stored split into a
floor, a list of downward jumps (handled exactly) and an optional smooth part
(integrated numerically), so ``f`` is never differentiated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, ClassVar, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .ruin import RuinSolution, h_value


class ConvergenceError(RuntimeError):
    """The penalty integral did not settle; ``V^f`` is likely infinite."""


class SmoothPart(Protocol):
    kind: ClassVar[str]

    @property
    def upper(self) -> float: ...

    def value(self, m: ArrayLike) -> NDArray[np.float64]: ...

    def slope(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True)
class Shortfall:
    """``max(level - m, 0)``: expected lifetime shortfall below ``level``."""

    level: float
    kind: ClassVar[str] = "shortfall"

    @property
    def upper(self) -> float:
        return self.level

    def value(self, m):
        return np.maximum(self.level - np.asarray(m, dtype=np.float64), 0.0)

    def slope(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x <= self.level, -1.0, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "b": self.level}


@dataclass(frozen=True)
class Exponential:
    """``scale * exp(-rate * m)``.  Grows too fast at -inf for a finite value; kept for divergence checks."""

    scale: float
    rate: float
    kind: ClassVar[str] = "exponential"

    @property
    def upper(self) -> float:
        return math.inf

    def value(self, m):
        return self.scale * np.exp(-self.rate * np.asarray(m, dtype=np.float64))

    def slope(self, x):
        return -self.rate * self.value(x)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "scale": self.scale, "rate": self.rate}


DENSITY_KINDS: dict[str, Callable[[dict[str, Any]], SmoothPart]] = {
    "shortfall": lambda d: Shortfall(level=float(d["b"])),
    "exponential": lambda d: Exponential(scale=float(d["scale"]), rate=float(d["rate"])),
}


@dataclass(frozen=True)
class PenaltyFunction:
    """``f(m) = a0 + sum_i a_i 1{m <= b_i} + smooth(m)`` with ``b_1 > b_2 > ...``."""

    a0: float = 0.0
    jumps: tuple[tuple[float, float], ...] = ()
    density: SmoothPart | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "jumps", tuple((float(b), float(a)) for b, a in self.jumps))
        if self.a0 < 0:
            raise ValueError("a0 must be nonnegative")
        if any(a <= 0 for _, a in self.jumps):
            raise ValueError("jump sizes must be positive")
        bs = [b for b, _ in self.jumps]
        if any(b2 >= b1 for b1, b2 in zip(bs, bs[1:])):
            raise ValueError("jump thresholds must be strictly decreasing")

    @classmethod
    def indicator(cls, b: float) -> PenaltyFunction:
        return cls(jumps=((b, 1.0),))

    @classmethod
    def shortfall(cls, b: float) -> PenaltyFunction:
        return cls(density=Shortfall(b))

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> PenaltyFunction:
        jumps = sorted(((float(j["b"]), float(j["a"])) for j in doc.get("jumps", [])), reverse=True)
        dens = doc.get("density")
        density = None
        if dens is not None:
            try:
                density = DENSITY_KINDS[dens["kind"]](dens)
            except KeyError as exc:
                raise ValueError(f"unknown penalty density kind {dens.get('kind')!r}") from exc
        return cls(a0=float(doc.get("a0", 0.0)), jumps=tuple(jumps), density=density)

    def to_dict(self) -> dict[str, Any]:
        return {
            "a0": self.a0,
            "jumps": [{"b": b, "a": a} for b, a in self.jumps],
            "density": None if self.density is None else self.density.to_dict(),
        }

    def __call__(self, m: ArrayLike):
        m_arr = np.asarray(m, dtype=np.float64)
        out = np.full(m_arr.shape, self.a0)
        for b, a in self.jumps:
            out = out + a * (m_arr <= b)
        if self.density is not None:
            out = out + self.density.value(m_arr)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ValueQuery:
    w: float
    m: float

    def __post_init__(self) -> None:
        if not self.m <= self.w:
            raise ValueError("running minimum m must not exceed current wealth w")


def _ruin_ratio(sol: RuinSolution, hw: float, w: float, b: float) -> float:
    # h(w)/h(b) for w > b; zero once w has reached the safe level
    if w >= sol.w_safe:
        return 0.0
    return hw / float(h_value(sol, b))


def value_indicator(sol: RuinSolution, q: ValueQuery, b: float) -> float:
    """Minimum probability that lifetime minimum wealth ends at or below ``b``."""
    if q.m <= b:
        return 1.0
    if not b < sol.w_safe:
        raise ValueError("ruin level b must be below the safe level")
    hw = float(h_value(sol, q.w))
    return _ruin_ratio(sol, hw, q.w, b)


def _jump_part(sol: RuinSolution, q: ValueQuery, f: PenaltyFunction) -> float:
    hw = float(h_value(sol, q.w)) if q.w < sol.w_safe else 0.0
    total = 0.0
    for b, a in f.jumps:
        if q.m <= b:
            total += a
        else:
            total += a * _ruin_ratio(sol, hw, q.w, b)
    return total


def value_step(sol: RuinSolution, q: ValueQuery, f: PenaltyFunction) -> float:
    if f.density is not None:
        raise ValueError("value_step takes a pure step penalty; use value_general")
    return f.a0 + _jump_part(sol, q, f)


def adaptive_simpson(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    a: float,
    b: float,
    tol: float,
    *,
    max_depth: int = 40,
) -> float:
    """Adaptive Simpson quadrature, refined breadth-first so ``func`` sees whole batches."""
    if b <= a:
        return 0.0
    xs = np.array([a, 0.5 * (a + b), b])
    with np.errstate(over="ignore", invalid="ignore"):
        fa, fm, fb = func(xs)
    lo, hi = np.array([a]), np.array([b])
    flo, fmid, fhi = np.array([fa]), np.array([fm]), np.array([fb])
    tols = np.array([tol])
    total = 0.0
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        q1, q3 = 0.5 * (lo + mid), 0.5 * (mid + hi)
        with np.errstate(over="ignore", invalid="ignore"):
            fq = func(np.concatenate([q1, q3]))
        f1, f3 = fq[: lo.size], fq[lo.size:]
        half = (hi - lo) / 12.0
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        left = half * (flo + 4.0 * f1 + fmid)
        right = half * (fmid + 4.0 * f3 + fhi)
        with np.errstate(invalid="ignore"):
            err = left + right - whole
        if not np.all(np.isfinite(err)):
            raise ConvergenceError("integrand is not finite on the integration range")
        # below ~100 ulp of the local estimate further refinement only chases rounding noise
        ok = np.abs(err) <= np.maximum(15.0 * tols, 1e-14 * np.abs(left + right))
        total += float(np.sum((left + right + err / 15.0)[ok]))
        if np.all(ok):
            return total
        bad = ~ok
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        flo, fmid, fhi = (np.concatenate([flo[bad], fmid[bad]]),
                          np.concatenate([f1[bad], f3[bad]]),
                          np.concatenate([fmid[bad], fhi[bad]]))
        tols = np.concatenate([tols[bad], tols[bad]]) / 2.0
    raise ConvergenceError("adaptive Simpson exceeded its refinement depth")


def _density_integral(
    sol: RuinSolution, q: ValueQuery, dens: SmoothPart, *, tol: float, max_expansions: int
) -> float:
    """``-int_{-inf}^{min(m, upper)} f_s'(x) h(w)/h(x) dx`` by chunks doubling toward -inf."""
    top = min(q.m, dens.upper)
    if q.w >= sol.w_safe:
        return 0.0
    hw = float(h_value(sol, q.w))

    def integrand(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return -dens.slope(x) * hw / h_value(sol, x)

    total = 0.0
    width = max(1.0, abs(top))
    hi = top
    prev_piece, growing = math.inf, 0
    for k in range(max_expansions):
        lo = hi - width
        try:
            piece = adaptive_simpson(integrand, lo, hi, tol * 0.5 ** (k + 1))
            with np.errstate(over="ignore", invalid="ignore"):
                edge = float(integrand(np.array([lo]))[0])
        except (OverflowError, FloatingPointError) as exc:
            raise ConvergenceError(f"penalty integral blew up near x={lo:g}") from exc
        if not (math.isfinite(piece) and math.isfinite(edge)):
            raise ConvergenceError(f"penalty integral is not finite near x={lo:g}")
        total += piece
        # a convergent tail shrinks on doubling chunks; steady growth means V^f is infinite
        growing = growing + 1 if piece >= prev_piece else 0
        if growing >= 4:
            raise ConvergenceError(f"penalty integral grows without bound beyond x={lo:g}")
        prev_piece = piece
        # truncate once the integrand, spread over the next (doubled) chunk, is negligible
        if edge * 2.0 * width <= 1e-14 * max(total, 1e-300):
            return total
        hi = lo
        width *= 2.0
    raise ConvergenceError(f"penalty integral not converged after {max_expansions} expansions")


def value_general(
    sol: RuinSolution,
    q: ValueQuery,
    f: PenaltyFunction,
    *,
    tol: float = 1e-9,
    max_expansions: int = 60,
) -> float:
    v = f.a0 + _jump_part(sol, q, f)
    if f.density is None:
        return v
    v += float(f.density.value(q.m))
    return v + _density_integral(sol, q, f.density, tol=tol, max_expansions=max_expansions)
