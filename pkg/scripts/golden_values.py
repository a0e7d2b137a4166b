"""Extended-precision reference values, computed without importing the package.

Every quantity is rebuilt from the explicit boundary formulas with mpmath at 60
significant digits, and every root is found by plain bisection. The output is
pasted into ``tests/golden.py``; rerun with ``python scripts/golden_values.py``.
"""

from __future__ import annotations

import json

import mpmath as mp

mp.mp.dps = 60

MARKET = {"r": "0.02", "mu": "0.06", "sigma": "0.2", "lam": "0.04"}
CASES = {
    "A": {"rho": "0.05", "c_bar": "0.01", "kappa": "1"},
    "B": {"rho": "0.02", "c_bar": "0.03", "kappa": "1"},
    "C": {"rho": "0.01", "c_bar": "0.03", "kappa": "1"},
}


def bisect(f, lo, hi, iters=400):
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("no sign change")
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def positive_root(a, b, c):
    return (-b + mp.sqrt(b * b - 4 * a * c)) / (2 * a)


def negative_root(a, b, c):
    return (-b - mp.sqrt(b * b - 4 * a * c)) / (2 * a)


def case_values(name: str) -> dict:
    r, mu, sigma, lam = (mp.mpf(MARKET[k]) for k in ("r", "mu", "sigma", "lam"))
    p = CASES[name]
    rho, cb, kappa = mp.mpf(p["rho"]), mp.mpf(p["c_bar"]), mp.mpf(p["kappa"])
    delta = ((mu - r) / sigma) ** 2 / 2
    A = (cb + rho * kappa) / r
    B1 = positive_root(delta, -(r - lam + delta), -lam)
    B2 = negative_root(delta, -(r - lam + delta), -lam)
    out = {"delta": delta, "B1": B1, "B2": B2}

    if rho != r:
        Bh1 = positive_root(delta, -(r - rho - lam + delta), -lam)
        e = cb / (rho - r)
        d = Bh1 / (Bh1 - 1)
        out.update(Bhat1=Bh1, d=d)
        den = Bh1 * (B1 - B2)
        bracket1 = A * Bh1 * (1 - B2) - kappa * (Bh1 - B2) + e * B2 * (1 - Bh1)
        bracket2 = A * Bh1 * (B1 - 1) - kappa * (B1 - Bh1) - e * B1 * (1 - Bh1)
        # u, v are D1*y_k^(B1-1) and D2*y_k^(B2-1)
        u, v = -bracket1 / den, -bracket2 / den
    else:
        a = cb / (delta + lam)
        S, T = kappa + a - A, kappa - A
        u = (T - B2 * S) / (B1 - B2)
        v = (B1 * S - T) / (B1 - B2)

    def lhs(x):
        return -(B1 * u * x ** (B1 - 1) + B2 * v * x ** (B2 - 1))

    hi = mp.mpf(2)
    while lhs(hi) <= A:
        hi *= 2
    x = bisect(lambda t: lhs(t) - A, mp.mpf(1), hi)
    y0 = 1 / (u * x ** (B1 - 1) + v * x ** (B2 - 1) + A)
    yk = y0 / x
    D1 = u * yk ** (1 - B1)
    D2 = v * yk ** (1 - B2)
    if rho != r:
        Dh1 = (kappa + e) / (Bh1 * yk ** (Bh1 - 1))
    else:
        Dh1 = kappa + a * (mp.log(yk) + 1)
    out.update(ratio=x, y0=y0, y_kappa=yk, D1=D1, D2=D2, Dhat1=Dh1)

    def h_inner(w):
        # solve the first-order condition for y > y_kappa, then evaluate the Legendre relation
        g = lambda y: D1 * B1 * y ** (B1 - 1) + D2 * B2 * y ** (B2 - 1) + A - w
        hi = yk * 2
        while g(hi) > 0:
            hi *= 2
        y = bisect(g, yk, hi)
        return D1 * y ** B1 + D2 * y ** B2 + (A - w) * y

    h_kappa = D1 * yk ** B1 + D2 * yk ** B2 + (A - kappa) * yk

    def h_outer(w):
        if rho > r:
            return h_kappa * ((w + e) / (kappa + e)) ** d
        if rho == r:
            return h_kappa * mp.exp(-(delta + lam) / cb * (w - kappa))
        ws = cb / (r - rho)
        return h_kappa * ((ws - w) / (ws - kappa)) ** d if w < ws else mp.mpf(0)

    def h(w):
        w = mp.mpf(w)
        return h_inner(w) if w < kappa else h_outer(w)

    out["h_0"] = h(0)
    if name == "A":
        # shortfall penalty below b=0 seen from w=m=2; substitute x = x(y) so no root finding is needed
        def wealth(y):
            return D1 * B1 * y ** (B1 - 1) + D2 * B2 * y ** (B2 - 1) + A

        def dwealth(y):
            return D1 * B1 * (B1 - 1) * y ** (B1 - 2) + D2 * B2 * (B2 - 1) * y ** (B2 - 2)

        def h_of_y(y):
            return D1 * y ** B1 + D2 * y ** B2 + (A - wealth(y)) * y

        h2 = h(2)
        out["shortfall_w2_m2_b0"] = mp.quad(lambda y: h2 / h_of_y(y) * -dwealth(y), [y0, 10 * y0, mp.inf])
    out["h_at"] = {w: h(w) for w in ("-1", "0.5", "2", "3.5")}
    if rho < r:
        out["w_safe"] = cb / (r - rho)
    return out


def hara_case_a(c: str) -> dict:
    r, mu, sigma, lam = (mp.mpf(MARKET[k]) for k in ("r", "mu", "sigma", "lam"))
    rho, cb = mp.mpf("0.05"), mp.mpf("0.01")
    delta = ((mu - r) / sigma) ** 2 / 2
    Bh1 = positive_root(delta, -(r - rho - lam + delta), -lam)
    d = Bh1 / (Bh1 - 1)
    c = mp.mpf(c)
    s = c + cb * r / (rho - r)
    return {"u": s ** d / d, "R_A": (1 - d) / s, "R_R": c * (1 - d) / s}


def main() -> None:
    doc = {}
    for name in CASES:
        vals = case_values(name)
        doc[name] = {k: (str(mp.nstr(v, 25)) if not isinstance(v, dict) else {kk: mp.nstr(vv, 25) for kk, vv in v.items()})
                     for k, v in vals.items()}
    doc["A"]["hara_c_0.11"] = {k: mp.nstr(v, 25) for k, v in hara_case_a("0.11").items()}
    print(json.dumps(doc, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
