"""Command-line front end: ``minwealth {solve,eval,verify} --config PROBLEM.json``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from typing import Any, Sequence

import numpy as np

from .config import GridSpec, ProblemConfig
from .dual import boundary_residuals
from .model import Regime
from .ruin import RuinSolution, h_eval, pi_star, psi, solve
from .tables import masked, render_csv
from .utility import default_grid, hara_from, reconstruct_utility, risk_aversion, verify_correspondence
from .value import PenaltyFunction, ValueQuery, value_general
from .verify import FdGrid, fd_solve, ode_residual, simulate_penalty, simulate_ruin

WHAT = ("psi", "pi", "h", "vf", "utility")
MODES = ("mc", "fd", "residual", "correspondence")


class CliError(Exception):
    pass


def _dumps(doc: Any) -> str:
    return json.dumps(_finite_tree(doc), indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _finite_tree(doc: Any) -> Any:
    # JSON has no inf/nan; saturated coefficients are reported as strings
    if isinstance(doc, dict):
        return {k: _finite_tree(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_finite_tree(v) for v in doc]
    if isinstance(doc, float) and not math.isfinite(doc):
        return "unbounded" if doc > 0 else ("-unbounded" if doc < 0 else "nan")
    return doc


def _json_default(obj: Any):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Regime):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite_or_label(x: float) -> float | str:
    return x if math.isfinite(x) else "unbounded"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def solution_summary(sol: RuinSolution) -> dict[str, Any]:
    c, p, s = sol.consts, sol.params, sol.spec
    summary: dict[str, Any] = {
        "regime": c.regime.value,
        "constants": {"delta": c.delta, "B1": c.B1, "B2": c.B2, "Bhat1": c.Bhat1, "Bhat2": c.Bhat2, "d": c.d},
        "w_safe": _finite_or_label(sol.w_safe),
        "dual": sol.dual.sol.to_dict(),
        "ratio": sol.dual.sol.ratio,
        "K_outer": sol.K_outer,
        "h_kappa": sol.h_kappa,
        "boundary_residuals": boundary_residuals(sol.dual),
    }
    if c.regime is Regime.RHO_EQUAL:
        summary["pi_star_above_kappa"] = p.merton_fraction * s.c_bar / (c.delta + p.lam)
    else:
        summary["pi_star_above_kappa"] = {"slope": p.merton_fraction / (1.0 - c.d),
                                          "intercept": p.merton_fraction * s.c_bar / ((s.rho - p.r) * (1.0 - c.d))}
    return summary


def cmd_solve(cfg: ProblemConfig, args: argparse.Namespace) -> int:
    if args.dump_config:
        _emit(_dumps(cfg.to_dict()), args.out)
        return 0
    _emit(_dumps(solution_summary(solve(cfg.market, cfg.consumption))), args.out)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _grid_for(cfg: ProblemConfig, what: str, override: str | None, sol: RuinSolution) -> GridSpec:
    if override:
        return GridSpec.parse(override)
    if what in cfg.grids:
        return cfg.grids[what]
    if "default" in cfg.grids:
        return cfg.grids["default"]
    if what == "utility":
        u = hara_from(cfg.market, cfg.consumption)
        hi = u.c_hi if math.isfinite(u.c_hi) else u.c_lo + 10.0 * cfg.consumption.rho
        return GridSpec(u.c_lo, hi, 101)
    hi = sol.w_safe if math.isfinite(sol.w_safe) else cfg.consumption.kappa + 10.0
    return GridSpec(-2.0, hi, 301)


def eval_table(cfg: ProblemConfig, what: str, grid: GridSpec) -> tuple[list[str], list[np.ndarray]]:
    sol = solve(cfg.market, cfg.consumption)
    x = np.linspace(grid.lo, grid.hi, grid.n)
    ws = sol.w_safe
    below_safe = x < ws
    if what == "psi":
        b = cfg.ruin_level
        if not b < ws:
            raise CliError("ruin_level must be below the safe level")
        ok = below_safe & (x >= b)
        vals = np.full_like(x, np.nan)
        vals[ok] = psi(sol, x[ok], b)
        return ["w", "psi"], [x, vals]
    if what == "pi":
        vals = np.full_like(x, np.nan)
        vals[below_safe] = pi_star(sol, x[below_safe])
        return ["w", "pi_star"], [x, vals]
    if what == "h":
        h, h1, h2 = (np.atleast_1d(a) for a in h_eval(sol, x))
        b = cfg.ruin_level
        ps = np.full_like(x, np.nan)
        ok = below_safe & (x >= b) if b < ws else np.zeros_like(below_safe)
        if np.any(ok):
            ps[ok] = psi(sol, x[ok], b)
        pi = np.full_like(x, np.nan)
        pi[below_safe] = pi_star(sol, x[below_safe])
        return ["w", "h", "h_prime", "h_double_prime", "psi", "pi_star"], [x, h, h1, h2, ps, pi]
    if what == "vf":
        f = cfg.penalty
        if f is None:
            raise CliError("eval vf needs a penalty section in the config")
        vals = np.full_like(x, np.nan)
        for i, w in enumerate(x):
            if w < ws:
                vals[i] = value_general(sol, ValueQuery(float(w), float(w)), f)
        return ["w", "m", "vf"], [x, x, vals]
    if what == "utility":
        u = hara_from(cfg.market, cfg.consumption)
        ok = (x > u.c_lo) & (x < u.c_hi)
        cols = [np.full_like(x, np.nan) for _ in range(4)]
        if np.any(ok):
            ra, rr = risk_aversion(u, x[ok])
            for col, vals in zip(cols, (u.value(x[ok]), u.marginal(x[ok]), ra, rr)):
                col[ok] = vals
        return ["c", "u", "u_prime", "R_A", "R_R"], [x, *cols]
    raise CliError(f"unknown curve {what!r}")


def cmd_eval(cfg: ProblemConfig, args: argparse.Namespace) -> int:
    sol = solve(cfg.market, cfg.consumption)
    grid = _grid_for(cfg, args.what, args.grid, sol)
    header, cols = eval_table(cfg, args.what, grid)
    _emit(render_csv(header, cols), args.out)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _check(name: str, value: float, bound: float, ok: bool | None = None) -> dict[str, Any]:
    passed = (value <= bound) if ok is None else ok
    return {"name": name, "value": value, "bound": bound, "verdict": "pass" if passed else "fail"}


def verify_residual(cfg: ProblemConfig, sol: RuinSolution) -> list[dict[str, Any]]:
    kappa, ws = cfg.consumption.kappa, sol.w_safe
    hi = min(ws, kappa + 10.0)
    w = np.linspace(-2.0, hi, 1001)
    w = w[(w != kappa) & (w < ws)]
    h = np.asarray(h_eval(sol, w)[0])
    bound = 1e-8 * (1.0 + cfg.market.lam * float(np.max(np.abs(h))))
    checks = [_check("hjb_residual_max", ode_residual(sol, w), bound)]
    for key, val in boundary_residuals(sol.dual).items():
        checks.append(_check(f"boundary_{key}", val, 1e-9))
    return checks


def verify_mc(cfg: ProblemConfig, sol: RuinSolution) -> list[dict[str, Any]]:
    sim, b = cfg.sim, cfg.ruin_level
    res = simulate_ruin(sim, sol, b)
    target = float(psi(sol, sim.w_init, b))
    allowance = 3.0 * res.std_error + 2.0 * sim.dt
    checks = [
        _check("mc_ruin_abs_error", abs(res.estimate - target), allowance),
        _check("mc_ruin_capped_fraction", res.n_capped / res.n_effective, 0.01),
    ]
    if cfg.penalty is not None:
        q = ValueQuery(sim.w_init, sim.minimum)
        pen = simulate_penalty(sim, sol, cfg.penalty)
        target_f = value_general(sol, q, cfg.penalty)
        checks.append(_check("mc_penalty_abs_error", abs(pen.estimate - target_f),
                             3.0 * pen.std_error + 2.0 * sim.dt))
    return checks


def fd_report(cfg: ProblemConfig, sol: RuinSolution) -> tuple[list[dict[str, Any]], dict[str, np.ndarray]]:
    s, fds = cfg.consumption, cfg.fd
    w_hi = fds.w_hi if fds.w_hi is not None else min(sol.w_safe, s.kappa + 40.0)
    report_hi = fds.report_hi if fds.report_hi is not None else min(w_hi, s.kappa + 5.0)
    errs = []
    fine = None
    for n in ((fds.n - 1) // 2 + 1, fds.n):
        fd = fd_solve(cfg.market, s, FdGrid(fds.w_lo, w_hi, n))
        win = (fd.w >= fds.report_lo) & (fd.w <= report_hi)
        closed = np.asarray(h_eval(sol, fd.w)[0])
        errs.append(float(np.max(np.abs(fd.h[win] - closed[win]))))
        fine = (fd, closed)
    fd, closed = fine
    checks = [
        _check("fd_sup_error", errs[1], 1e-3),
        _check("fd_refinement_ratio", errs[1] / errs[0] if errs[0] > 0 else 0.0, 0.6),
        _check("fd_policy_cap_inactive", float(fd.cap_active), 0.0),
    ]
    table = {"w": fd.w, "h_fd": fd.h, "h_closed": closed, "abs_err": np.abs(fd.h - closed)}
    return checks, table


def verify_correspondence_checks(cfg: ProblemConfig, sol: RuinSolution) -> list[dict[str, Any]]:
    grid = default_grid(sol, 100)
    w0 = float(grid[grid.size // 2])
    rec = reconstruct_utility(sol, w0, grid)
    cc = verify_correspondence(sol, None, grid, w0)
    return [
        _check("utility_reconstruction_rel_dev", rec.max_rel_dev, 1e-6),
        _check("identity_residual_max", cc.max_identity_residual, cc.identity_bound),
        _check("k_negative", cc.k, 0.0, ok=cc.k < 0),
        _check("pi_agreement_rel_dev", cc.pi_rel_dev, 1e-5),
        _check("marginal_utility_rel_dev", cc.marginal_rel_dev, 1e-6),
        _check("consumption_slope_dev", cc.consumption_slope_dev, 1e-8),
    ]


def cmd_verify(cfg: ProblemConfig, args: argparse.Namespace) -> int:
    sol = solve(cfg.market, cfg.consumption)
    if args.mode == "residual":
        checks = verify_residual(cfg, sol)
    elif args.mode == "mc":
        checks = verify_mc(cfg, sol)
    elif args.mode == "fd":
        checks, table = fd_report(cfg, sol)
        if args.table:
            with open(args.table, "w", encoding="utf-8", newline="") as fh:
                fh.write(render_csv(list(table), list(table.values())))
    else:
        checks = verify_correspondence_checks(cfg, sol)
    passed = all(c["verdict"] == "pass" for c in checks)
    report = {"mode": args.mode, "regime": sol.regime.value, "checks": checks, "passed": passed}
    for c in checks:
        print(f"{c['verdict'].upper():4s} {c['name']}: {c['value']:.6g} (bound {c['bound']:.6g})", file=sys.stderr)
    _emit(_dumps(report), args.out)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minwealth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, metavar="PATH", help="problem description (JSON)")
        p.add_argument("--out", metavar="PATH", help="write output here instead of standard output")
        p.add_argument("--seed", type=int, metavar="U64", help="override sim.seed")

    p_solve = sub.add_parser("solve", help="solve the closed form and print a summary")
    common(p_solve)
    p_solve.add_argument("--dump-config", action="store_true", help="echo the normalized config instead")

    p_eval = sub.add_parser("eval", help="tabulate a curve as CSV")
    common(p_eval)
    p_eval.add_argument("--what", required=True, choices=WHAT)
    p_eval.add_argument("--grid", metavar="LO:HI:N", help="evaluation grid (consumption for utility)")

    p_verify = sub.add_parser("verify", help="run a numerical oracle and report pass/fail")
    common(p_verify)
    p_verify.add_argument("--mode", required=True, choices=MODES)
    p_verify.add_argument("--table", metavar="PATH", help="fd mode: write w, h_fd, h_closed, abs_err here")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ProblemConfig.load(args.config)
        if args.seed is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
        handler = {"solve": cmd_solve, "eval": cmd_eval, "verify": cmd_verify}[args.command]
        return handler(cfg, args)
    except (OSError, ValueError, ArithmeticError, RuntimeError, CliError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
