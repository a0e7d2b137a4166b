"""Bracketed scalar root finding: Newton steps safeguarded by bisection."""

from __future__ import annotations

import math
from typing import Callable


class RootFindingError(RuntimeError):
    pass


def expand_bracket(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    factor: float = 2.0,
    max_expansions: int = 60,
) -> tuple[float, float]:
    """Grow ``hi`` geometrically (``hi *= factor``) until ``f`` changes sign on ``[lo, hi]``."""
    flo = f(lo)
    for _ in range(max_expansions + 1):
        fhi = f(hi)
        if flo == 0.0 or fhi == 0.0 or (flo < 0) != (fhi < 0):
            return lo, hi
        lo, flo = hi, fhi
        hi *= factor
    raise RootFindingError(f"no sign change found after {max_expansions} expansions (last hi={hi:g})")


def newton_bisect(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-14,
    maxiter: int = 200,
) -> float:
    """Root of ``f`` in ``[lo, hi]``; ``f(lo)`` and ``f(hi)`` must differ in sign.

    Newton iterates are accepted only while they stay strictly inside the
    current bracket and shrink ``|f|`` by half; otherwise the step is a bisection.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        raise RootFindingError(f"f has the same sign at both ends of [{lo:g}, {hi:g}]")
    increasing = fhi > 0
    x = 0.5 * (lo + hi)
    fx = f(x)
    for _ in range(maxiter):
        if fx == 0.0:
            return x
        if (fx > 0) == increasing:
            hi = x
        else:
            lo = x
        tol = max(xtol, 4.0 * math.ulp(abs(x)))
        if hi - lo <= tol:
            return x
        dfx = fprime(x)
        x_new = x - fx / dfx if dfx != 0.0 and math.isfinite(dfx) else math.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
            fx_new = f(x_new)
        else:
            fx_new = f(x_new)
            if abs(fx_new) > 0.5 * abs(fx):
                # slow Newton progress: take a bisection of the updated bracket instead
                if (fx_new > 0) == increasing:
                    hi = x_new
                else:
                    lo = x_new
                x_new = 0.5 * (lo + hi)
                fx_new = f(x_new)
        if abs(x_new - x) <= tol:
            return x_new
        x, fx = x_new, fx_new
    raise RootFindingError(f"no convergence after {maxiter} iterations (bracket [{lo:g}, {hi:g}])")
