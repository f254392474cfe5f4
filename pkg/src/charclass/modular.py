"""q-expansions: Bernoulli numbers, Eisenstein series, the theta ratio,
the Eisenstein differential equations, degenerations and the quasi-Jacobi
generators feeding the elliptic instance of f.

Conventions: G_k = -B_k/(2k) + sum_n sigma_{k-1}(n) q^n for even k, 0 for
odd k; theta_ratio is theta(x)/theta'(0) from the triple product, with the
q^{1/8} and prod(1-q^n) prefactors cancelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from gmpy2 import mpq

from .report import CheckResult
from .ring import (
    Poly, Ring, Series, SubstitutionTable, Trunc, canonical_serialize, mul_trunc,
    parse_poly, series_exp, series_inverse, series_log, solve_linear_symbol,
    substitute_linear, LinearForm,
)


@lru_cache(maxsize=None)
def bernoulli(k: int) -> mpq:
    """B_k with B_1 = -1/2, from sum_{j<=k} C(k+1, j) B_j = 0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return mpq(1)
    s = sum(math.comb(k + 1, j) * bernoulli(j) for j in range(k))
    return -s / (k + 1)


def sigma(n: int, k: int) -> int:
    return sum(d ** k for d in range(1, n + 1) if n % d == 0)


def q_ring(q="q") -> Ring:
    return Ring(q=q)


def eisenstein(k: int, q_cap: int, ring: Ring | None = None) -> Poly:
    """G_k truncated at q^q_cap, as a polynomial in the ring's q variable."""
    ring = ring or q_ring()
    if k % 2 or k <= 0:
        return ring.zero()
    terms = {ring.one().terms.popitem()[0]: -bernoulli(k) / (2 * k)}
    for n in range(1, q_cap + 1):
        terms[ring.mono_from_names({ring.q: n})] = mpq(sigma(n, k - 1))
    return Poly(ring, terms)


def _exp_linear_1d(c, ring: Ring, var: str, cap: int) -> Poly:
    """exp(c*var) truncated at var^cap (c rational)."""
    x = ring.gen(var)
    out = ring.zero()
    for n in range(cap + 1):
        out = out + (x ** n) * (mpq(c) ** n / math.factorial(n))
    return out


def theta_unit(x_cap: int, q_cap: int, var="x", q="q") -> Series:
    """U with theta(x)/theta'(0) = x*U(x), truncated at x^x_cap, q^q_cap."""
    ring = Ring([var], q=q)
    T = Trunc(series_cap=x_cap, q_cap=q_cap)
    x = ring.gen(var)
    qq = ring.gen(q)
    # (e^{x/2}-e^{-x/2})/x = sum x^{2k} / (4^k (2k+1)!)
    u = ring.zero()
    for k in range(0, x_cap // 2 + 1):
        u = u + x ** (2 * k) * mpq(1, 4 ** k * math.factorial(2 * k + 1))
    U = Series(u, T)
    ep = Series(_exp_linear_1d(1, ring, var, x_cap), T)
    em = Series(_exp_linear_1d(-1, ring, var, x_cap), T)
    for n in range(1, q_cap + 1):
        qn = qq ** n
        num = (1 - Series(qn, T) * ep) * (1 - Series(qn, T) * em)
        den = Series((1 - qn) ** 2, T).inverse()
        U = U * num * den
    return U


def theta_ratio(x_cap: int, q_cap: int, var="x", q="q") -> Series:
    """f(x) = theta_tau(x)/theta'_tau(0), truncated at x^x_cap, q^q_cap."""
    U = theta_unit(max(x_cap - 1, 0), q_cap, var, q)
    ring = U.ring
    return Series(U.poly * ring.gen(var), Trunc(series_cap=x_cap, q_cap=q_cap))


def theta_log_unit(order: int, q_cap: int, var="x", q="q") -> list:
    """Coefficients g_1..g_order of log(theta(x)/(x theta'(0))) as q-polynomials."""
    U = theta_unit(order, q_cap, var, q)
    L = U.log().poly
    qr = q_ring(q)
    out = []
    for i in range(1, order + 1):
        out.append(L.coeff_of(var, i).to_ring(qr))
    return out


def _first_mismatch(a: Poly, b: Poly, var: str, q: str):
    diff = a - b
    if diff.is_zero():
        return None
    r = diff.ring
    best = min((r.exponent(m, var), r.exponent(m, q)) for m in diff.terms)
    return best


def check_theta_expansion(x_cap: int, q_cap: int, g_override: dict | None = None) -> CheckResult:
    """theta_ratio == x * exp(-2 sum_k G_k x^k / k!) up to the caps."""
    f = theta_ratio(x_cap, q_cap)
    ring = f.ring
    T = Trunc(series_cap=x_cap, q_cap=q_cap)
    x = ring.gen("x")
    arg = ring.zero()
    for k in range(1, x_cap + 1):
        if g_override and k in g_override:
            Gk = g_override[k].to_ring(ring)
        else:
            Gk = eisenstein(k, q_cap).to_ring(ring)
        arg = arg + Gk * x ** k * mpq(-2, math.factorial(k))
    rhs = Series(x, T) * Series(arg, Trunc(series_cap=x_cap - 1, q_cap=q_cap)).exp()
    mm = _first_mismatch(f.poly, rhs.poly, "x", "q")
    if mm is None:
        return CheckResult("theta_expansion", True, f"x-cap {x_cap}, q-cap {q_cap}")
    return CheckResult("theta_expansion", False, f"first mismatch at x^{mm[0]} q^{mm[1]}")


# ---------------------------------------------------------------------------
# Eisenstein differential equations

def _g(k):
    return f"G{k}"


def check_u_ode(k_max: int, q_cap: int) -> CheckResult:
    """u'' = 12(u/x^2 + u^2) - 5 G_4 for u = sum_{k>=1} G_{2k+2} x^{2k}/(2k)!.

    Works symbolically in G-symbols, solves each x^{2m} coefficient for its
    top Eisenstein series, expresses it in G_4, G_6 and re-verifies every
    derived relation (and the equation itself) by q-expansion.
    """
    top = 2 * k_max + 4
    gnames = [_g(k) for k in range(4, top + 1, 2)]
    ring = Ring(["x"], gnames)
    x = ring.gen("x")
    u = ring.zero()
    for k in range(1, k_max + 2):
        u = u + ring.gen(_g(2 * k + 2)) * x ** (2 * k) * mpq(1, math.factorial(2 * k))
    u_over_x2 = u.shift("x", -2)
    residual = u.diff("x", 2) - 12 * (u_over_x2 + u * u) + 5 * ring.gen("G4")
    table = SubstitutionTable()
    relations = []
    ok = True
    details = []
    qr = q_ring()
    gq = {n: eisenstein(int(n[1:]), q_cap).to_ring(qr) for n in gnames}
    for m in range(0, k_max + 1):
        rel = residual.coeff_of("x", 2 * m)
        if m == 0:
            reduced = rel
            if not reduced.is_zero():
                ok = False
                details.append(f"x^0 coefficient nonzero: {rel}")
            relations.append(("x^0", "0", canonical_serialize(rel)))
            continue
        reduced = table.apply(rel)
        if reduced.is_zero():
            relations.append((f"x^{2 * m}", "0", "identity"))
            continue
        target = _g(2 * m + 4)
        c, rest = solve_linear_symbol(reduced, target)
        expr = table.apply(-rest / c)
        table.add(target, expr)
        # re-verify by q-expansion
        lhs = gq[target]
        rhs = expr.to_ring(Ring(params=gnames, q="q")).subs(
            {n: v.to_ring(Ring(params=gnames, q="q")) for n, v in gq.items()})
        rhs = _qtrunc(rhs.to_ring(qr) if not rhs.free_symbols() - {"q"} else rhs, q_cap)
        good = _qtrunc(lhs, q_cap) == rhs
        ok &= good
        relations.append((f"x^{2 * m}", target, canonical_serialize(expr)))
        if not good:
            details.append(f"{target} relation fails q-expansion")
    # the ODE itself with q-series coefficients
    r2 = Ring(["x"], q="q")
    resq = residual.to_ring(Ring(["x"], gnames, "q")).subs(
        {n: v.to_ring(Ring(["x"], gnames, "q")) for n, v in gq.items()})
    resq = _qtrunc(resq, q_cap)
    for m in range(0, k_max + 1):
        if not resq.coeff_of("x", 2 * m).is_zero():
            ok = False
            details.append(f"q-expanded residual nonzero at x^{2 * m}")
    return CheckResult("u_ode", ok, "; ".join(details) or f"k_max {k_max}, q-cap {q_cap}",
                       relations=relations)


def check_v_ode(k_max: int, q_cap: int) -> CheckResult:
    """12(x^2 v''^2 + v'') - x^2 (v'''' + 5 v''''(0)) = 0, v = sum_{k>=2} G_{2k} x^{2k}/(2k)!."""
    n = 2 * k_max + 6
    ring = Ring(["x"], q="q")
    x = ring.gen("x")
    v = ring.zero()
    for k in range(2, n // 2 + 1):
        v = v + eisenstein(2 * k, q_cap).to_ring(ring) * x ** (2 * k) * mpq(1, math.factorial(2 * k))
    v2 = v.diff("x", 2)
    v4 = v.diff("x", 4)
    v4_0 = v4.coeff_of("x", 0)
    expr = 12 * (x * x * v2 * v2 + v2) - x * x * (v4 + 5 * v4_0)
    expr = _qtrunc(expr, q_cap)
    ok = all(expr.coeff_of("x", j).is_zero() for j in range(0, 2 * k_max + 1))
    return CheckResult("v_ode", ok, f"checked through x^{2 * k_max}, q-cap {q_cap}")


def _qtrunc(p: Poly, q_cap: int) -> Poly:
    r = p.ring
    if r.q_idx is None:
        return p
    return Poly(r, {m: c for m, c in p.terms.items() if r.field(m, r.q_idx) <= q_cap})


def eisenstein_blowup_coefficients(max_index: int, q_cap: int) -> dict:
    """{ "a{2k}": -2 G_{2k}/(2k)! } as q-polynomials."""
    return {f"a{2 * k}": eisenstein(2 * k, q_cap) * mpq(-2, math.factorial(2 * k))
            for k in range(1, max_index // 2 + 1)}


# ---------------------------------------------------------------------------
# quasi-Jacobi generators

def _xf_series(order: int, weight_cap: int, q_cap: int):
    """x*F(x,h) = ((x+h)/h) U(x+h)/(U(x)U(h)) in (x, h Laurent, q)."""
    U = theta_unit(weight_cap, q_cap, "t")
    reg = Ring(["x", "h"], q="q")
    T = Trunc(series_cap=weight_cap, q_cap=q_cap)
    Ux = substitute_linear(U, LinearForm({"x": 1}), reg, T)
    Uh = substitute_linear(U, LinearForm({"h": 1}), reg, T)
    Uxh = substitute_linear(U, LinearForm({"x": 1, "h": 1}), reg, T)
    G = Uxh * (Ux * Uh).inverse()
    lring = Ring(["x", "h"], q="q", laurent=["h"])
    LT = Trunc(series_cap=weight_cap, q_cap=q_cap, regular_cap=order, floors={"h": -order})
    pref = lring.one() + Poly(lring, {lring.mono_from_names({"x": 1, "h": -1}): mpq(1)})
    xF = Series(pref, LT) * Series(G.poly.to_ring(lring), LT)
    return xF, LT


def etilde_formula(i: int, weight_cap: int, q_cap: int, ring: Ring | None = None) -> Poly:
    """(-1)^i/(i h^i) + sum_{i<k<=weight_cap} 2/k! C(k,i) G_k h^{k-i}."""
    ring = ring or Ring(["h"], q="q", laurent=["h"])
    out = Poly(ring, {ring.mono_from_names({"h": -i}): mpq((-1) ** i, i)})
    h = ring.gen("h")
    for k in range(i + 1, weight_cap + 1):
        Gk = eisenstein(k, q_cap).to_ring(ring)
        if Gk.is_zero():
            continue
        out = out + Gk * h ** (k - i) * mpq(2 * math.comb(k, i), math.factorial(k))
    return out


def elliptic_b(i: int, q_cap: int, weight_cap: int, ring: Ring | None = None) -> Poly:
    """b_i := Etilde_i for the elliptic f(x) = x exp(sum Etilde_i x^i)."""
    return etilde_formula(i, weight_cap, q_cap, ring)


@dataclass
class QuasiJacobi:
    phi: list
    etilde: list
    ring: Ring
    trunc: Trunc


def phi_etilde(i_max: int, q_cap: int, weight_cap: int) -> QuasiJacobi:
    xF, LT = _xf_series(i_max, weight_cap, q_cap)
    E = -(xF.log())
    ring = xF.ring
    phis = [xF.poly.coeff_of("x", i) for i in range(1, i_max + 1)]
    ets = [E.poly.coeff_of("x", i) for i in range(1, i_max + 1)]
    return QuasiJacobi(phis, ets, ring, LT)


def check_quasijacobi(i_max: int, q_cap: int, weight_cap: int) -> list:
    """Triangle Etilde(phi), the closed formula for Etilde_i, the E_i/e_k identity and Etilde_5 = 6/5 Etilde_2 Etilde_3."""
    qj = phi_etilde(i_max, q_cap, weight_cap)
    ring, T = qj.ring, qj.trunc
    x = ring.gen("x")
    P = [None] + [Series(qj.phi[i - 1] * x ** i, T) for i in range(1, i_max + 1)]
    Et = [None] + [Series(qj.etilde[i - 1] * x ** i, T) for i in range(1, i_max + 1)]
    results = []
    tri = {}
    if i_max >= 1:
        tri[1] = -P[1]
    if i_max >= 2:
        tri[2] = (P[1] * P[1] - 2 * P[2]) * mpq(1, 2)
    if i_max >= 3:
        tri[3] = (-(P[1] * P[1] * P[1]) + 3 * P[2] * P[1] - 3 * P[3]) * mpq(1, 3)
    if i_max >= 4:
        tri[4] = (P[1] * P[1] * P[1] * P[1] - 4 * P[2] * P[1] * P[1] + 4 * P[3] * P[1]
                  + 2 * P[2] * P[2] - 4 * P[4]) * mpq(1, 4)
    bad = [i for i, v in tri.items() if not (v - Et[i]).is_zero()]
    results.append(CheckResult("etilde_triangle", not bad,
                               f"checked i<= {min(i_max, 4)}" + (f"; failing {bad}" if bad else "")))
    bad = []
    for i in range(1, i_max + 1):
        formula = Series(etilde_formula(i, weight_cap, q_cap, Ring(["h"], q="q", laurent=["h"]))
                         .to_ring(ring) * x ** i, T)
        if not (formula - Et[i]).is_zero():
            bad.append(i)
    results.append(CheckResult("etilde_formula", not bad,
                               f"i<= {i_max}" + (f"; failing {bad}" if bad else "")))
    results.append(capital_E_check(i_max, q_cap, weight_cap))
    if i_max >= 5:
        lhs = Et[5]
        rhs = Et[2] * Et[3] * mpq(6, 5)
        results.append(CheckResult("etilde5_relation", (lhs - rhs).is_zero(),
                                   "Etilde_5 = 6/5 Etilde_2 Etilde_3",
                                   canonical_serialize(rhs.poly.coeff_of("x", 5)),
                                   canonical_serialize(lhs.poly.coeff_of("x", 5))))
    return results


def capital_E_check(i_max: int, q_cap: int, weight_cap: int, e_override: dict | None = None) -> CheckResult:
    """Etilde_i = ((-1)^i/i)(E_i(tau,h) - e_i(tau)) with e_k = 2/(k-1)! G_k."""
    ring = Ring(["h"], q="q", laurent=["h"])
    h = ring.gen("h")

    def e(k):
        if e_override and k in e_override:
            return e_override[k].to_ring(ring)
        return eisenstein(k, q_cap).to_ring(ring) * mpq(2, math.factorial(k - 1))

    bad = []
    for i in range(1, i_max + 1):
        Ei = Poly(ring, {ring.mono_from_names({"h": -i}): mpq(1)})
        for k in range(i, weight_cap + 1):
            Ei = Ei + e(k) * h ** (k - i) * ((-1) ** i * math.comb(k - 1, i - 1))
        lhs = etilde_formula(i, weight_cap, q_cap, ring)
        rhs = (Ei - e(i)) * mpq((-1) ** i, i)
        if lhs != rhs:
            bad.append(i)
    return CheckResult("capital_E", not bad, f"i<= {i_max}" + (f"; failing {bad}" if bad else ""))


# ---------------------------------------------------------------------------
# degenerations

def _unit_1d(kind: str, cap: int) -> Series:
    """(1-e^{-t})/t as a series in t."""
    ring = Ring(["t"])
    t = ring.gen("t")
    out = ring.zero()
    for n in range(cap + 1):
        out = out + t ** n * mpq((-1) ** n, math.factorial(n + 1))
    return Series(out, Trunc(series_cap=cap))


def _xhF_theta(cap: int, q_cap: int) -> Series:
    """x h F(x,h) = (x+h) U(x+h)/(U(x)U(h)), a regular series in x, h, q."""
    U = theta_unit(cap, q_cap, "t")
    reg = Ring(["x", "h"], q="q")
    T = Trunc(series_cap=cap, q_cap=q_cap)
    Ux = substitute_linear(U, LinearForm({"x": 1}), reg, T)
    Uh = substitute_linear(U, LinearForm({"h": 1}), reg, T)
    Uxh = substitute_linear(U, LinearForm({"x": 1, "h": 1}), reg, T)
    x, h = reg.gens("x", "h")
    return Series(x + h, T) * Uxh * (Ux * Uh).inverse()


def check_q0_limit(cap: int, q_cap: int = 1) -> CheckResult:
    """q^0 part of x h F equals x h (1-e^{-(x+h)})/((1-e^{-x})(1-e^{-h}))."""
    theta_side = _xhF_theta(cap, q_cap)
    reg = theta_side.ring
    T = Trunc(series_cap=cap, q_cap=q_cap)
    q0 = theta_side.poly.coeff_of("q", 0)
    V = _unit_1d("todd", cap)
    Vx = substitute_linear(V, LinearForm({"x": 1}), reg, T)
    Vh = substitute_linear(V, LinearForm({"h": 1}), reg, T)
    Vxh = substitute_linear(V, LinearForm({"x": 1, "h": 1}), reg, T)
    x, h = reg.gens("x", "h")
    todd = Series(x + h, T) * Vxh * (Vx * Vh).inverse()
    ok = q0 == todd.poly
    return CheckResult("q0_limit", ok, f"x,h-cap {cap}")


def check_fourier(cap: int, n_max: int) -> CheckResult:
    """q^n coefficient of x h F equals x h sum_{d|n} (a^-d b^-n/d - a^d b^n/d), a=e^x, b=e^h."""
    theta_side = _xhF_theta(cap, n_max)
    reg = theta_side.ring
    T = Trunc(series_cap=cap, q_cap=n_max)
    x, h = reg.gens("x", "h")
    bad = []
    for n in range(1, n_max + 1):
        coeff = theta_side.poly.coeff_of("q", n)
        s = reg.zero()
        for d in range(1, n + 1):
            if n % d:
                continue
            e = n // d
            s = s + _exp_form(-d, -e, reg, cap - 2) - _exp_form(d, e, reg, cap - 2)
        rhs = Series(x * h * s, T).poly
        if coeff != rhs:
            bad.append(n)
    return CheckResult("fourier", not bad, f"n<= {n_max}, x,h-cap {cap}"
                       + (f"; failing n={bad}" if bad else ""))


def _exp_form(cx, ch, ring, cap):
    L = ring.gen("x") * cx + ring.gen("h") * ch
    out = ring.zero()
    p = ring.one()
    for k in range(cap + 1):
        out = out + p * mpq(1, math.factorial(k))
        p = p * L
    return out


def check_gaussian(cap: int) -> CheckResult:
    """f = x e^{mu x^2}:  x F(x,h) = e^{2 mu h x}(1 + x/h), mu symbolic."""
    ring = Ring(["x", "h"], ["mu"], laurent=["h"])
    T = Trunc(series_cap=cap, floors={"h": -1})
    x, h, mu = ring.gens("x", "h", "mu")
    ex = lambda p: Series(p, T).exp()
    # x F = (x+h) u(x+h) / (h u(x) u(h)),  u(t) = e^{mu t^2}
    ratio = ex(mu * (x + h) ** 2 - mu * x * x - mu * h * h)
    inv_h = Poly(ring, {ring.mono_from_names({"h": -1}): mpq(1)})
    lhs = Series((x + h) * inv_h, T) * ratio
    rhs = ex(2 * mu * h * x) * Series(1 + x * inv_h, T)
    return CheckResult("gaussian", lhs == rhs, f"total cap {cap}")


def degeneration_checks(q_cap: int = 3, cap: int = 6) -> list:
    return [check_q0_limit(cap), check_fourier(cap, q_cap), check_gaussian(cap)]
