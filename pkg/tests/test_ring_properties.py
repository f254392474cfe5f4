"""Randomized properties of the exact polynomial and truncated-series kernel."""

import pytest
from gmpy2 import mpq
from hypothesis import given, seed
from hypothesis import strategies as st

from charclass.ring import (
    LaurentUnderflow, Poly, Ring, Series, Trunc, canonical_serialize, mul_trunc, parse_poly,
    truncate,
)
from props import LRING, RING, SEED, laurent_polys, no_constant, polys

CAPS = st.integers(0, 6)


@seed(SEED)
@given(polys(), polys(), polys())
def test_ring_axioms(a, b, c):
    z, one = RING.zero(), RING.one()
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + z == a and a * one == a and a * z == z
    assert a - a == z and -(-a) == a


@seed(SEED)
@given(polys(), polys(), CAPS)
def test_truncation_is_an_ideal(a, b, cap):
    t = Trunc(series_cap=cap)
    full = truncate(a * b, t)
    assert mul_trunc(a, b, t) == full
    assert mul_trunc(truncate(a, t), truncate(b, t), t) == full
    assert truncate(truncate(a + b, t), t) == truncate(a, t) + truncate(b, t)


@seed(SEED)
@given(polys(), polys(), CAPS, CAPS)
def test_truncation_caps_compose(a, b, c1, c2):
    t1, t2 = Trunc(series_cap=c1, var_caps={"x": c2}), Trunc(series_cap=c2)
    both = t1.merge(t2)
    assert truncate(truncate(a, t1), t2) == truncate(a, both)
    assert (Series(a, t1) * Series(b, t2)).poly == truncate(a * b, both)


@seed(SEED)
@given(laurent_polys(), laurent_polys(), st.integers(1, 4))
def test_laurent_truncation(a, b, cap):
    t = Trunc(series_cap=cap + 4, regular_cap=cap, q_cap=2, floors={"h": -4})
    try:
        full = truncate(a * b, t)
    except LaurentUnderflow:
        return
    assert mul_trunc(truncate(a, t), truncate(b, t), t) == full


@seed(SEED)
@given(polys(max_deg=3), st.integers(1, 6))
def test_exp_log_round_trip(p, cap):
    t = Trunc(series_cap=cap)
    s = Series(no_constant(p), t)
    assert s.exp().log() == s
    u = Series(no_constant(p) + RING.one(), t)
    assert u.log().exp() == u


@seed(SEED)
@given(polys(max_deg=3), polys(max_deg=3), st.integers(1, 6))
def test_exp_is_a_homomorphism(a, b, cap):
    t = Trunc(series_cap=cap)
    A, B = Series(no_constant(a), t), Series(no_constant(b), t)
    assert (A + B).exp() == A.exp() * B.exp()


@seed(SEED)
@given(polys(max_deg=3), st.integers(1, 5), st.integers(1, 6))
def test_mul_inverse_round_trip(p, c0, cap):
    t = Trunc(series_cap=cap)
    u = Series(no_constant(p) + RING.const(c0), t)
    assert u * u.inverse() == Series(RING.one(), t)
    assert u.inverse().inverse() == u


@seed(SEED)
@given(polys(), polys(), st.sampled_from(["x", "y", "c"]))
def test_leibniz(a, b, v):
    assert (a * b).diff(v) == a.diff(v) * b + a * b.diff(v)
    assert (a * b).diff(v, 2) == a.diff(v, 2) * b + 2 * a.diff(v) * b.diff(v) + a * b.diff(v, 2)


@seed(SEED)
@given(polys())
def test_serialize_parse_round_trip(p):
    text = canonical_serialize(p)
    assert parse_poly(text, RING) == p
    assert canonical_serialize(parse_poly(text, RING)) == text


@seed(SEED)
@given(laurent_polys())
def test_serialize_laurent_round_trip(p):
    assert parse_poly(canonical_serialize(p), LRING) == p


@seed(SEED)
@given(polys(), polys())
def test_substitution_is_a_homomorphism(a, b):
    m = {"x": RING.gen("y") + RING.gen("c"), "c": RING.const(mpq(2, 3))}
    assert (a * b).subs(m) == a.subs(m) * b.subs(m)
    assert (a + b).subs(m) == a.subs(m) + b.subs(m)


def test_floats_are_refused():
    with pytest.raises(TypeError):
        RING.gen("x") * 0.5
    with pytest.raises(TypeError):
        RING.const(1.0)


def test_serialize_is_canonical():
    r = Ring(params=["b10", "b2", "a"])
    p = parse_poly("b10 + 3/6*b2^2 - a*b2 + 7")
    assert canonical_serialize(p.to_ring(r)) == canonical_serialize(p)
    assert canonical_serialize(p) == "-a*b2 + 1/2*b2^2 + b10 + 7"
