"""Utility functions whose Merton problem shares the ruin-minimizing strategy.

On ``(kappa, w^s)`` consumption is affine, ``c(w) = c_bar + rho*w``, and the
strategy that minimizes the probability of ruin is also optimal for an
investor with a HARA utility of consumption.  This module evaluates those
utilities in closed form and checks the correspondence numerically: the
utility and the Merton value function are rebuilt from the strategy alone
by quadrature and compared with the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad

from .model import ConsumptionSpec, MarketParams, Regime, consumption_rate, derive_constants
from .ruin import DomainError, RuinSolution, h_eval, outer_strategy, pi_from_derivatives


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class HaraUtility:
    """HARA utility of consumption on the open interval ``(c_lo, c_hi)``.

    ``shift`` is ``c_bar*r/(rho - r)``: the utility is a power of ``c + shift``
    when ``rho > r`` and of ``-shift - c`` when ``rho < r``.
    """

    regime: Regime
    d: float | None
    c_bar: float
    r: float
    rho: float
    delta: float
    lam: float
    c_lo: float
    c_hi: float

    @property
    def shift(self) -> float:
        return self.c_bar * self.r / (self.rho - self.r)

    @property
    def exp_rate(self) -> float:
        # rate of the exponential utility when rho == r
        return (self.delta + self.lam) / (self.c_bar * self.r)

    def _check(self, c: ArrayLike) -> NDArray[np.float64]:
        c = np.asarray(c, dtype=np.float64)
        if np.any(~((c > self.c_lo) & (c < self.c_hi))):
            raise DomainError(f"consumption outside the open utility domain ({self.c_lo:g}, {self.c_hi:g})")
        return c

    def value(self, c: ArrayLike):
        c = self._check(c)
        if self.regime is Regime.RHO_EQUAL:
            out = -np.exp(-self.exp_rate * c) / self.exp_rate
        elif self.regime is Regime.RHO_GREATER:
            out = (c + self.shift) ** self.d / self.d
        else:
            out = -((-self.shift - c) ** self.d) / self.d
        return _scalar(out)

    def marginal(self, c: ArrayLike):
        c = self._check(c)
        if self.regime is Regime.RHO_EQUAL:
            out = np.exp(-self.exp_rate * c)
        elif self.regime is Regime.RHO_GREATER:
            out = (c + self.shift) ** (self.d - 1.0)
        else:
            out = (-self.shift - c) ** (self.d - 1.0)
        return _scalar(out)

    def curvature(self, c: ArrayLike):
        """Second derivative ``u''(c)``."""
        c = self._check(c)
        if self.regime is Regime.RHO_EQUAL:
            out = -self.exp_rate * np.exp(-self.exp_rate * c)
        elif self.regime is Regime.RHO_GREATER:
            out = (self.d - 1.0) * (c + self.shift) ** (self.d - 2.0)
        else:
            out = -(self.d - 1.0) * (-self.shift - c) ** (self.d - 2.0)
        return _scalar(out)


def _scalar(a: NDArray[np.float64]):
    return float(a) if np.ndim(a) == 0 else a


def hara_from(params: MarketParams, spec: ConsumptionSpec) -> HaraUtility:
    """Utility matched to the consumption rule above the kink."""
    c = derive_constants(params, spec)
    ws = c.w_safe.upper()
    return HaraUtility(regime=c.regime, d=c.d, c_bar=spec.c_bar, r=params.r, rho=spec.rho, delta=c.delta,
                       lam=params.lam, c_lo=spec.c_bar + spec.rho * spec.kappa,
                       c_hi=math.inf if math.isinf(ws) else spec.c_bar + spec.rho * ws)


def hara_u(u: HaraUtility, c: ArrayLike):
    return u.value(c)


def risk_aversion(u: HaraUtility, c: ArrayLike):
    """Absolute and relative risk aversion ``(-u''/u', -c u''/u')``."""
    c = u._check(c)
    if u.regime is Regime.RHO_EQUAL:
        ra = np.full_like(c, u.exp_rate)
    elif u.regime is Regime.RHO_GREATER:
        ra = (1.0 - u.d) / (c + u.shift)
    else:
        ra = (u.d - 1.0) / (-u.shift - c)
    return _scalar(ra), _scalar(c * ra)


def utility_table(u: HaraUtility, c: ArrayLike) -> dict[str, NDArray[np.float64]]:
    """Columns ``c, u, u_prime, R_A, R_R`` for export."""
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    ra, rr = risk_aversion(u, c)
    return {"c": c, "u": np.atleast_1d(u.value(c)), "u_prime": np.atleast_1d(u.marginal(c)),
            "R_A": np.atleast_1d(ra), "R_R": np.atleast_1d(rr)}


# ---------------------------------------------------------------------------
# reconstruction from the strategy
# ---------------------------------------------------------------------------

def default_grid(sol: RuinSolution, n: int = 100) -> NDArray[np.float64]:
    """``n`` interior points of ``(kappa, w^s)``, or of ``(kappa, kappa + 10)`` when ``w^s`` is infinite."""
    hi = sol.w_safe if math.isfinite(sol.w_safe) else sol.spec.kappa + 10.0
    return np.linspace(sol.spec.kappa, hi, n + 2)[1:-1]


def _check_grid(sol: RuinSolution, grid: ArrayLike) -> NDArray[np.float64]:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 3:
        raise ValueError("grid must be a 1-d array of at least 3 points")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if not (g[0] > sol.spec.kappa and g[-1] < sol.w_safe):
        raise DomainError("grid must lie inside (kappa, w^s)")
    return g


def _quad(f, a: float, b: float) -> float:
    val, err, *rest = quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200, full_output=1)
    if len(rest) > 1:
        raise QuadratureError(f"quadrature on [{a:g}, {b:g}] failed: {rest[1]}")
    return float(val)


class _MarginalKernel:
    """``exp(L(v))`` with ``L(v) = -(mu-r)/sigma^2 * int_{w0}^{v} dz/pi(z)``: the ratio ``V'(v)/V'(w0)``."""

    def __init__(self, sol: RuinSolution, w0: float):
        self.sol = sol
        self.w0 = w0
        self.m = sol.params.merton_fraction

    def inv_pi(self, z: float) -> float:
        return 1.0 / float(outer_strategy(self.sol, z))

    def log_ratio(self, a: float, b: float) -> float:
        return -self.m * _quad(self.inv_pi, a, b)

    def cumulative(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """``L`` at each point, accumulated over the segments between sorted points."""
        pts = np.concatenate(([self.w0], points))
        order = np.argsort(pts, kind="stable")
        sp = pts[order]
        seg = np.zeros(sp.size)
        for k in range(1, sp.size):
            seg[k] = self.log_ratio(float(sp[k - 1]), float(sp[k]))
        cum = np.cumsum(seg)
        cum -= cum[np.searchsorted(sp, self.w0)]
        back = np.empty_like(cum)
        back[order] = cum
        return back[1:]

    def integral(self, points: NDArray[np.float64], logs: NDArray[np.float64], weight: float) -> NDArray[np.float64]:
        """``weight * int_{w0}^{v} exp(L(s)) ds`` at each point, by segments between sorted points."""
        pts = np.concatenate(([self.w0], points))
        lg = np.concatenate(([0.0], logs))
        order = np.argsort(pts, kind="stable")
        sp, sl = pts[order], lg[order]
        seg = np.zeros(sp.size)
        for k in range(1, sp.size):
            a, la = float(sp[k - 1]), float(sl[k - 1])
            seg[k] = _quad(lambda s, a=a, la=la: math.exp(la + self.log_ratio(a, s)), a, float(sp[k]))
        cum = np.cumsum(seg)
        cum -= cum[np.searchsorted(sp, self.w0)]
        back = np.empty_like(cum)
        back[order] = cum
        return weight * back[1:]


@dataclass(frozen=True)
class ReconstructedUtility:
    w: NDArray[np.float64]
    c: NDArray[np.float64]
    u: NDArray[np.float64]
    u_closed: NDArray[np.float64]
    calibration: tuple[int, int]
    max_rel_dev: float


def reconstruct_utility(sol: RuinSolution, w0: float, grid: ArrayLike,
                        u: HaraUtility | None = None) -> ReconstructedUtility:
    """Utility along ``c(w)`` rebuilt from the strategy alone.

    ``u(c(w)) = u(c(w0)) + (V^u)'(w0) * int_{w0}^{w} c'(v) exp(L(v)) dv`` with
    ``c' = rho``.  The two free constants are fixed by matching the closed
    form at the first and last grid points; the deviation is measured at all
    points, relative to the largest ``|u|`` on the grid.
    """
    g = _check_grid(sol, grid)
    if not g[0] < w0 < g[-1]:
        raise ValueError("w0 must lie strictly inside the grid")
    u = u or hara_from(sol.params, sol.spec)
    kern = _MarginalKernel(sol, w0)
    logs = kern.cumulative(g)
    shape = kern.integral(g, logs, sol.spec.rho)
    c = np.asarray(consumption_rate(sol.spec, g))
    closed = np.asarray(u.value(c))
    i, j = 0, g.size - 1
    beta = (closed[j] - closed[i]) / (shape[j] - shape[i])
    alpha = closed[i] - beta * shape[i]
    rec = alpha + beta * shape
    # scaled by the largest |u| on the grid: u vanishes at the singular endpoint when rho < r
    dev = float(np.max(np.abs(rec - closed)) / np.max(np.abs(closed)))
    return ReconstructedUtility(w=g, c=c, u=rec, u_closed=closed, calibration=(i, j), max_rel_dev=dev)


@dataclass(frozen=True)
class CorrespondenceCheck:
    """Outcome of rebuilding the Merton value function from the ruin-minimizing strategy.

    ``k`` is ``h'(w0) / (V^u)'(w0)``; the identity
    ``(rho + lam) k V(w) - k u(c(w)) = lam h(w)`` is checked on ``grid``.
    """

    w0: float
    k: float
    grid: NDArray[np.float64]
    identity_residual: NDArray[np.float64]
    max_identity_residual: float
    identity_bound: float
    marginal_rel_dev: float
    pi_rel_dev: float
    consumption_slope_dev: float

    @property
    def passed(self) -> bool:
        return (self.k < 0 and self.max_identity_residual < self.identity_bound
                and self.pi_rel_dev < 1e-5 and self.marginal_rel_dev < 1e-6)


def verify_correspondence(sol: RuinSolution, u: HaraUtility | None, grid: ArrayLike,
                          w0: float | None = None) -> CorrespondenceCheck:
    """Rebuild ``V^u`` from the strategy and check it against ``h`` and ``u``.

    ``(V^u)'(w0)`` is taken as ``u'(c(w0))``; ``(V^u)''(w0)`` follows from the
    Merton feedback form of the strategy and ``V^u(w0)`` from the Merton HJB at
    ``w0``.  Away from ``w0``, ``V^u`` comes from quadrature of the strategy only.
    """
    g = _check_grid(sol, grid)
    u = u or hara_from(sol.params, sol.spec)
    if w0 is None:
        w0 = float(g[g.size // 2])
    p, s = sol.params, sol.spec
    m = p.merton_fraction
    kern = _MarginalKernel(sol, w0)
    c0 = float(consumption_rate(s, w0))
    v1_0 = float(u.marginal(c0))
    pi0 = float(outer_strategy(sol, w0))
    v2_0 = -m * v1_0 / pi0
    delta = sol.consts.delta
    v0 = ((p.r * w0 - c0) * v1_0 + float(u.value(c0)) - delta * v1_0**2 / v2_0) / (s.rho + p.lam)

    logs = kern.cumulative(g)
    v1 = v1_0 * np.exp(logs)
    v = v0 + kern.integral(g, logs, v1_0)
    # second derivative straight from the integrand: V'' = V' * dL/dw = -V' * m / pi
    pi_used = outer_strategy(sol, g)
    v2 = -m * v1 / pi_used
    pi_u = -m * v1 / v2

    h, h1, _ = (np.asarray(a) for a in h_eval(sol, g))
    h1_0 = float(h_eval(sol, w0)[1])
    k = h1_0 / v1_0
    c = np.asarray(consumption_rate(s, g))
    resid = (s.rho + p.lam) * k * v - k * np.asarray(u.value(c)) - p.lam * h
    bound = 1e-6 * p.lam * float(np.max(np.abs(h)))

    pi_ref = np.asarray(pi_from_derivatives(sol, g))
    pi_dev = float(np.max(np.abs(pi_u - pi_ref) / np.abs(pi_ref)))
    marg = np.asarray(u.marginal(c))
    marg_dev = float(np.max(np.abs(marg - v1) / np.abs(marg)))
    eps = 1e-6 * max(1.0, float(np.max(np.abs(g))))
    slope = (np.asarray(consumption_rate(s, g + eps)) - np.asarray(consumption_rate(s, g - eps))) / (2.0 * eps)
    slope_dev = float(np.max(np.abs(slope - s.rho)))
    return CorrespondenceCheck(w0=float(w0), k=float(k), grid=g, identity_residual=resid,
                               max_identity_residual=float(np.max(np.abs(resid))), identity_bound=bound,
                               marginal_rel_dev=marg_dev, pi_rel_dev=pi_dev, consumption_slope_dev=slope_dev)
