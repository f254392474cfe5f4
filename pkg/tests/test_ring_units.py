"""Deterministic checks of solving, substitution tables, linear forms and parsing."""

import pytest
from gmpy2 import mpq

from charclass.ring import (
    CycleError, LaurentUnderflow, LinearForm, NonConstantCoefficientError, NonlinearError, Ring,
    Series, SubstitutionTable, Trunc, ZeroCoefficientError, canonical_serialize, parse_poly,
    solve_linear_symbol, substitute_linear, truncate,
)

R = Ring(params=["b2", "b3", "b4", "b5"])


def P(text):
    return parse_poly(text, R)


def test_solve_linear_symbol():
    c, rest = solve_linear_symbol(P("3*b5 - b2*b3 + 1"), "b5")
    assert c == 3 and rest == P("1 - b2*b3")


@pytest.mark.parametrize("text, sym, err", [
    ("b2*b3", "b5", ZeroCoefficientError),
    ("b5^2 + b2", "b5", NonlinearError),
    ("b2*b5 + 1", "b5", NonConstantCoefficientError),
])
def test_solve_errors(text, sym, err):
    with pytest.raises(err):
        solve_linear_symbol(P(text), sym)


def test_substitution_table_resolves_chains():
    t = SubstitutionTable([("b5", P("b4 + b3")), ("b4", P("2*b2"))])
    assert t.apply(P("b5*b2")) == P("2*b2^2 + b2*b3")
    assert t.resolved()["b5"] == P("2*b2 + b3")


def test_substitution_cycle_detected():
    t = SubstitutionTable([("b5", P("b4")), ("b4", P("b5 + 1"))])
    with pytest.raises(CycleError):
        t.apply(P("b5"))


def test_duplicate_entry_rejected():
    t = SubstitutionTable([("b5", P("b4"))])
    with pytest.raises(ValueError):
        t.add("b5", P("b3"))


def test_linear_form_parse_and_order():
    L = LinearForm.parse("s - x1 + x10 + 2*x2")
    assert L.variables() == ["s", "x1", "x2", "x10"]
    assert str(-L) == "-s + x1 - 2*x2 - x10"
    with pytest.raises(ValueError):
        LinearForm.parse("x*y")
    assert LinearForm.parse("x - x") == LinearForm({})


def test_parse_accepts_products_and_parentheses():
    assert P("1/42*(8*b2^3 + 24*b4*b2 + 27*b3^2)") == P("4/21*b2^3 + 4/7*b2*b4 + 9/14*b3^2")
    assert P("-(b2 - b3)^2") == P("-b2^2 + 2*b2*b3 - b3^2")


def test_canonical_order_is_graded_descending():
    assert canonical_serialize(P("1 + b2 + b2^2*b3 + b5")) == "b2^2*b3 + b2 + b5 + 1"


def test_laurent_floor_underflow():
    r = Ring(["x", "h"], laurent=["h"])
    p = parse_poly("h^-3*x", r)
    with pytest.raises(LaurentUnderflow):
        truncate(p, Trunc(series_cap=4, floors={"h": -2}))


def test_substitute_linear_composes():
    r1 = Ring(["t"])
    t = r1.gen("t")
    f = Series(t + t * t * mpq(1, 2), Trunc(series_cap=3))
    r2 = Ring(["x", "y"])
    got = substitute_linear(f, LinearForm.parse("x - y"), r2, Trunc(series_cap=3)).poly
    assert got == parse_poly("x - y + 1/2*x^2 - x*y + 1/2*y^2", r2)


def test_q_and_var_caps():
    r = Ring(["x"], q="q")
    p = parse_poly("x + x^3*q^2 + q^5 + x^2", r)
    assert truncate(p, Trunc(series_cap=2, q_cap=2)) == parse_poly("x + x^2", r)
    assert truncate(p, Trunc(q_cap=4, var_caps={"x": 1})) == parse_poly("x", r)
