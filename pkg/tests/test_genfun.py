"""Instances of f against independent sympy expansions."""

import pytest
import sympy as sp
from gmpy2 import mpq

from charclass.genfun import (
    EllipticF, Gaussian, GenericF, Hirzebruch, Identity, ThetaRatio, Todd, expand_f, expand_unit,
)
from charclass.ring import CapError, LinearForm, Ring, SubstitutionTable, Trunc, parse_poly

x, h, nu, mu = sp.symbols("x h nu mu")
X = LinearForm({"x": 1})


def as_sympy(p):
    return sp.sympify(str(p).replace("^", "**")) if not p.is_zero() else sp.Integer(0)


def sympy_taylor(expr, var, n):
    return sp.expand(sp.series(expr, var, 0, n + 1).removeO())


@pytest.mark.parametrize("inst, expr", [
    (Identity(), x),
    (Todd(nu=1), 1 - sp.exp(-x)),
    (Todd(nu="nu"), (1 - sp.exp(-nu * x)) / nu),
    (Gaussian(), x * sp.exp(mu * x ** 2)),
])
def test_closed_form_instances(inst, expr):
    f = expand_f(inst, X, Trunc(series_cap=8))
    assert sp.expand(as_sympy(f.poly) - sympy_taylor(expr, x, 8)) == 0


def test_todd_low_order():
    f = expand_f(Todd(nu="nu"), X, Trunc(series_cap=3)).poly
    assert f == parse_poly("x - 1/2*nu*x^2 + 1/6*nu^2*x^3", f.ring)


def test_hirzebruch_against_sympy():
    cap = 5
    f = expand_f(Hirzebruch(), X, Trunc(series_cap=cap, regular_cap=cap, floors={"h": -cap})).poly
    F = (1 - sp.exp(-x)) * (1 - sp.exp(-h)) / (1 - sp.exp(-(x + h)))
    ser = sp.series(F, x, 0, cap + 1).removeO()
    for k in range(cap + 1):
        want = sp.series(sp.simplify(ser.coeff(x, k)), h, 0, cap - k + 1).removeO()
        assert sp.expand(as_sympy(f.coeff_of("x", k)) - want) == 0, k


def test_generic_with_table_and_gauge():
    r = Ring(params=["c2"])
    tab = SubstitutionTable([("c3", r.gen("c2") ** 2)])
    inst = GenericF(order=3, prefix="c", fixed={1}, table=tab).twisted("lam")
    assert inst.params(3) == ["c2", "lam"]
    u = expand_unit(inst, X, Trunc(series_cap=3)).poly
    c2, lam = sp.symbols("c2 lam")
    want = sympy_taylor(sp.exp(lam * x + c2 * x ** 2 + c2 ** 2 * x ** 3), x, 3)
    assert sp.expand(as_sympy(u) - want) == 0


def test_even_parity_drops_odd_symbols():
    inst = GenericF(prefix="a", parity="even", fixed={2})
    assert inst.params(8) == ["a4", "a6", "a8"]


def test_cap_errors_suggest_the_cap():
    with pytest.raises(CapError) as e:
        expand_f(GenericF(order=3), X, Trunc(series_cap=6))
    assert e.value.suggested is not None
    expand_f(ThetaRatio(x_cap=4, q_cap=1), X, Trunc(series_cap=5, q_cap=1))
    with pytest.raises(CapError):
        expand_f(ThetaRatio(x_cap=4, q_cap=1), X, Trunc(series_cap=6, q_cap=1))
    with pytest.raises(CapError):
        expand_f(ThetaRatio(x_cap=8, q_cap=1), X, Trunc(series_cap=5, q_cap=2))


def test_theta_ratio_low_coefficients():
    # f = x - G_2 x^3 + ... with G_2 = -1/24 + q + ...; at q^0 this is 2 sinh(x/2)
    f = expand_f(ThetaRatio(x_cap=4, q_cap=1), X, Trunc(series_cap=3, q_cap=1)).poly
    assert f.coefficient({"x": 1}) == 1
    assert f.coefficient({"x": 3}) == mpq(1, 24)
    assert f.coefficient({"x": 3, "q": 1}) == -1
    assert f.coefficient({"x": 2}) == 0


def test_elliptic_q0_is_hirzebruch():
    cap = 5
    T = Trunc(series_cap=cap, regular_cap=cap, q_cap=0, floors={"h": -cap})
    e = expand_f(EllipticF(x_cap=cap, q_cap=0, h_floor=-cap), X, T).poly
    hz = expand_f(Hirzebruch(), X, T.replace(q_cap=None)).poly
    assert e.to_ring(hz.ring) == hz
