"""Independent numerical oracles for the closed-form solution.

Two checks that share no code with the dual construction beyond the
strategy being simulated:

* Monte Carlo simulation of the controlled wealth process under the
  analytic strategy, with exponential killing at the hazard rate;
* a finite-difference policy-iteration solver for the ruin HJB.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kernels
from .model import ConsumptionSpec, MarketParams, Regime, consumption_rate, derive_constants, validate
from .ruin import DomainError, RuinSolution, hjb_residual, pi_star
from .value import PenaltyFunction

DEFAULT_SEED = 20240611


class FdConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``roulette_every`` is the spacing (years) of the unbiased path-termination
    checkpoints used by ``simulate_ruin``; ``m_init`` defaults to ``w_init``.
    """

    dt: float = 1.0 / 250.0
    n_paths: int = 200_000
    seed: int = DEFAULT_SEED
    w_init: float = 2.0
    m_init: float | None = None
    horizon_cap: float = 500.0
    roulette_every: float = 5.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.m_init is not None and self.m_init > self.w_init:
            raise ValueError("m_init must not exceed w_init")
        if not self.horizon_cap > 0:
            raise ValueError("horizon_cap must be positive")
        if not self.roulette_every > 0:
            raise ValueError("roulette_every must be positive")

    @property
    def minimum(self) -> float:
        return self.w_init if self.m_init is None else self.m_init

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> SimConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown sim keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class SimResult:
    estimate: float
    std_error: float
    n_effective: int
    ci95: tuple[float, float]
    n_capped: int = 0
    unreliable: bool = False

    @classmethod
    def from_samples(cls, x: NDArray[np.float64], capped: NDArray[np.bool_]) -> SimResult:
        n = x.size
        est = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        n_capped = int(np.count_nonzero(capped))
        return cls(est, se, n, (est - 1.96 * se, est + 1.96 * se), n_capped, n_capped > 0.01 * n)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_policy(sol: RuinSolution, lo: float, n_nodes: int = 65537) -> tuple[NDArray, NDArray]:
    """Pack the analytic strategy for the kernels: scalars plus a table on ``[lo, kappa]``.

    Inside the table the strategy is linearly interpolated; below ``lo`` the
    kernels solve for the dual variable exactly, above kappa they use the
    closed form.
    """
    p, s, c, d = sol.params, sol.spec, sol.consts, sol.dual.sol
    lo = min(lo, s.kappa - 1.0)
    grid = np.linspace(lo, s.kappa, n_nodes)
    table = np.ascontiguousarray(pi_star(sol, grid), dtype=np.float64)
    pol = np.zeros(kernels.POLICY_LEN)
    pol[kernels.P_R] = p.r
    pol[kernels.P_EXCESS] = p.mu - p.r
    pol[kernels.P_SIGMA] = p.sigma
    pol[kernels.P_LAM] = p.lam
    pol[kernels.P_CFLOOR] = s.floor_rate
    pol[kernels.P_RHO] = s.rho
    pol[kernels.P_KAPPA] = s.kappa
    pol[kernels.P_WSAFE] = sol.w_safe
    pol[kernels.P_MERTON] = p.merton_fraction
    if c.regime is Regime.RHO_EQUAL:
        pol[kernels.P_REGIME] = kernels.REGIME_EQUAL
        pol[kernels.P_CONST_PI] = p.merton_fraction * s.c_bar / (c.delta + p.lam)
    else:
        pol[kernels.P_REGIME] = kernels.REGIME_GREATER if c.regime is Regime.RHO_GREATER else kernels.REGIME_LESS
        pol[kernels.P_SHIFT] = s.c_bar / (s.rho - p.r)
        pol[kernels.P_D] = c.d
    pol[kernels.P_TAB_LO] = lo
    pol[kernels.P_TAB_DW] = (s.kappa - lo) / (n_nodes - 1)
    pol[kernels.P_P] = d.P
    pol[kernels.P_Q] = d.Q
    pol[kernels.P_B1] = c.B1
    pol[kernels.P_B2] = c.B2
    pol[kernels.P_A] = s.floor_rate / p.r
    pol[kernels.P_Z0] = 1.0
    return pol, table


def simulate_ruin(cfg: SimConfig, sol: RuinSolution, b: float) -> SimResult:
    """Estimate ``psi(w_init; b)`` as ``E[exp(-lam*tau_b) 1{tau_b < tau_safe}]`` by Euler-Maruyama.

    Death is not sampled; the hitting time is discounted instead, which has
    lower variance than tracking the minimum to a sampled death time.
    """
    if not b < sol.w_safe:
        raise DomainError("ruin level b must be below the safe level")
    if cfg.w_init < b:
        raise DomainError("w_init must be at least b")
    pol, table = build_policy(sol, b - 1.0)
    payoff, capped = kernels.ruin_paths(pol, table, cfg.seed, cfg.n_paths, float(cfg.w_init), float(b),
                                        cfg.dt, cfg.horizon_cap, cfg.roulette_every)
    return SimResult.from_samples(payoff, capped)


def simulate_minimum(cfg: SimConfig, sol: RuinSolution) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Per-path lifetime minimum wealth ``M_{tau_d}`` and horizon-cap flags."""
    # wide table: unkilled paths can drift well below the start before death
    pol, table = build_policy(sol, min(cfg.minimum, cfg.w_init) - 30.0, n_nodes=262145)
    return kernels.minimum_paths(pol, table, cfg.seed, cfg.n_paths, float(cfg.w_init), float(cfg.minimum),
                                 cfg.dt, cfg.horizon_cap)


def simulate_penalty(cfg: SimConfig, sol: RuinSolution, f: PenaltyFunction) -> SimResult:
    """Estimate ``E[f(M_{tau_d})]`` under the analytic strategy with sampled death times."""
    minima, capped = simulate_minimum(cfg, sol)
    return SimResult.from_samples(np.asarray(f(minima), dtype=np.float64), capped)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FdGrid:
    """Uniform grid; ``w_lo`` moves by at most half a spacing so that kappa is a node."""

    w_lo: float
    w_hi: float
    n: int
    boundary_hi: float = 0.0

    def __post_init__(self) -> None:
        if not self.w_lo < self.w_hi:
            raise ValueError("w_lo must be below w_hi")
        if self.n < 3:
            raise ValueError("need at least 3 nodes")

    def nodes(self, kappa: float) -> NDArray[np.float64]:
        if not self.w_lo < kappa < self.w_hi:
            return np.linspace(self.w_lo, self.w_hi, self.n)
        j = int(round((kappa - self.w_lo) / (self.w_hi - self.w_lo) * (self.n - 1)))
        j = min(max(j, 1), self.n - 2)
        step = (self.w_hi - kappa) / (self.n - 1 - j)
        w = kappa + step * (np.arange(self.n) - j)
        w[j] = kappa
        w[-1] = self.w_hi
        return w


@dataclass(frozen=True)
class FdSolution:
    w: NDArray[np.float64]
    h: NDArray[np.float64]
    pi: NDArray[np.float64]
    iterations: int
    last_change: float
    cap_active: bool = field(default=False)

    def to_dict(self) -> dict[str, Any]:
        return {"n": int(self.w.size), "w_lo": float(self.w[0]), "w_hi": float(self.w[-1]),
                "iterations": self.iterations, "last_change": self.last_change, "cap_active": self.cap_active}


def _assemble(w: NDArray, pi: NDArray, params: MarketParams, spec: ConsumptionSpec):
    """Tridiagonal rows of ``0.5 s^2 pi^2 h'' + (r w - c + (mu-r) pi) h' - lam h = 0`` at interior nodes.

    Central differences where they keep the matrix an M-matrix, upwind for
    the drift elsewhere.
    """
    dw = np.diff(w)
    hm, hp = dw[:-1], dw[1:]
    wi = w[1:-1]
    a = 0.5 * params.sigma**2 * pi[1:-1] ** 2
    drift = params.r * wi - consumption_rate(spec, wi) + (params.mu - params.r) * pi[1:-1]
    # nonuniform three-point stencil (the grid is uniform except possibly next to kappa)
    diff_l = 2.0 * a / (hm * (hm + hp))
    diff_u = 2.0 * a / (hp * (hm + hp))
    cen_l = -drift * hp / (hm * (hm + hp))
    cen_u = drift * hm / (hp * (hm + hp))
    cen_d = drift * (hp - hm) / (hm * hp)
    lower = diff_l + cen_l
    upper = diff_u + cen_u
    diag = -(diff_l + diff_u) + cen_d - params.lam
    bad = (lower < 0) | (upper < 0)
    if np.any(bad):
        up_l = np.where(drift < 0, -drift / hm, 0.0)
        up_u = np.where(drift > 0, drift / hp, 0.0)
        lower = np.where(bad, diff_l + up_l, lower)
        upper = np.where(bad, diff_u + up_u, upper)
        diag = np.where(bad, -(diff_l + diff_u) - up_l - up_u - params.lam, diag)
    return lower, diag, upper


def _improve(w: NDArray, h: NDArray, merton: float, cap: float) -> tuple[NDArray, bool]:
    dw = np.diff(w)
    hm, hp = dw[:-1], dw[1:]
    d1 = (h[2:] * hm**2 - h[:-2] * hp**2 - h[1:-1] * (hm**2 - hp**2)) / (hm * hp * (hm + hp))
    d2 = 2.0 * (h[2:] * hm + h[:-2] * hp - h[1:-1] * (hm + hp)) / (hm * hp * (hm + hp))
    pi = np.full_like(h, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(d2 > 0, -merton * d1 / d2, cap)
    clipped = np.clip(inner, -cap, cap)
    pi[1:-1] = clipped
    pi[0], pi[-1] = pi[1], pi[-2]
    return pi, bool(np.any(np.abs(inner) >= cap))


def _interp_cubic(w: NDArray, h: NDArray, x: float) -> float:
    # four-point Lagrange interpolation, so renormalizing off-node stays below the scheme's error
    j = int(np.clip(np.searchsorted(w, x) - 2, 0, w.size - 4))
    xs, ys = w[j:j + 4], h[j:j + 4]
    total = 0.0
    for k in range(4):
        others = np.delete(xs, k)
        total += ys[k] * float(np.prod((x - others) / (xs[k] - others)))
    return total


def fd_solve(params: MarketParams, spec: ConsumptionSpec, grid: FdGrid, *, tol: float = 1e-10,
             max_iter: int = 500) -> FdSolution:
    """Policy iteration for the ruin HJB with Dirichlet data ``1`` at ``w_lo`` and ``boundary_hi`` at ``w_hi``.

    The result is rescaled so ``h(0) = 1`` (by cubic interpolation if 0 is
    not a node), matching the normalization of the closed form.
    """
    validate(params, spec)
    consts = derive_constants(params, spec)
    ws = consts.w_safe.upper()
    if grid.w_hi > ws:
        raise ValueError("w_hi must not exceed the safe level")
    w = grid.nodes(spec.kappa)
    merton = params.merton_fraction
    cap = 10.0 * (grid.w_hi - grid.w_lo) * merton
    # convex decreasing start: exponential decay across the domain
    span = w[-1] - w[0]
    h = grid.boundary_hi + (1.0 - grid.boundary_hi) * np.expm1(-(w - w[0]) / (0.25 * span) + 4.0) / math.expm1(4.0)
    h[0], h[-1] = 1.0, grid.boundary_hi
    pi, _ = _improve(w, h, merton, cap)
    change = math.inf
    for it in range(1, max_iter + 1):
        lower, diag, upper = _assemble(w, pi, params, spec)
        rhs = np.zeros(w.size - 2)
        rhs[0] -= lower[0] * 1.0
        rhs[-1] -= upper[-1] * grid.boundary_hi
        inner = kernels.solve_tridiagonal(np.ascontiguousarray(lower), np.ascontiguousarray(diag),
                                          np.ascontiguousarray(upper), rhs)
        h_new = np.concatenate(([1.0], inner, [grid.boundary_hi]))
        change = float(np.max(np.abs(h_new - h)))
        h = h_new
        pi, cap_hit = _improve(w, h, merton, cap)
        if change < tol:
            break
    else:
        raise FdConvergenceError(f"policy iteration did not converge in {max_iter} iterations (last change {change:.3g})")
    scale = _interp_cubic(w, h, 0.0) if w[0] <= 0.0 <= w[-1] else 1.0
    return FdSolution(w=w, h=h / scale, pi=pi, iterations=it, last_change=change, cap_active=cap_hit)


def ode_residual(sol: RuinSolution, points: ArrayLike) -> float:
    """Max over points of ``|lam*h - (r w - c(w)) h' + delta h'^2/h''|``; points at or above ``w^s`` count as 0."""
    w = np.atleast_1d(np.asarray(points, dtype=np.float64))
    live = w < sol.w_safe
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(hjb_residual(sol, w[live]))))
