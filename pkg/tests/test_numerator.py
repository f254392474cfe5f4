"""Cleared numerators: order independence, a division oracle, gauge covariance, extraction."""

import math
from collections import Counter

import pytest
from gmpy2 import mpq
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from charclass.genfun import GenericF, Todd, expand_unit
from charclass.numerator import (
    Combination, DRRecipe, FactorTerm, clear_denominators, dr_coefficients, gauge_defect,
    numerator_series, term_series, term_series_naive,
)
from charclass.ring import (
    LinearForm, Ring, Series, Trunc, derivative_at_zero, mul_trunc, series_inverse,
)
from charclass.scenarios import constructions as B
from props import SEED

VARS = ("x", "y", "z")
forms = st.dictionaries(st.sampled_from(VARS), st.integers(-2, 2).filter(bool),
                        min_size=1, max_size=3).map(LinearForm)
terms = st.builds(lambda c, n, d: FactorTerm(c, n, d), st.integers(-3, 3).filter(bool),
                  st.lists(forms, min_size=1, max_size=3), st.lists(forms, max_size=2))
combos = st.lists(terms, min_size=1, max_size=3).map(Combination)
INST = GenericF(prefix="c")


def cleared_series(c, inst, cap, **kw):
    c = clear_denominators(c)
    m = max(len(t.numer) for t in c.terms)
    return numerator_series(c, inst, Trunc(series_cap=m + cap), **kw).poly, c


@seed(SEED)
@settings(max_examples=25)
@given(combos, st.randoms(use_true_random=False))
def test_numerator_order_independence(c, rnd):
    a, ca = cleared_series(c, INST, 3)
    shuffled = list(c.terms)
    rnd.shuffle(shuffled)
    shuffled = [FactorTerm(t.coeff, rnd.sample(t.numer, len(t.numer)), t.denom[::-1])
                for t in shuffled]
    b, cb = cleared_series(Combination(shuffled), INST, 3)
    assert ca.canonical() == cb.canonical()
    assert a == b.to_ring(a.ring)


@seed(SEED)
@settings(max_examples=25)
@given(combos)
def test_power_sum_path_matches_naive_product(c):
    a, cc = cleared_series(c, INST, 3)
    b, _ = cleared_series(c, INST, 3, naive=True)
    assert a == b


def _unit_product(inst, fs, ring, trunc):
    p = ring.one()
    for L in fs:
        p = mul_trunc(p, expand_unit(inst, L, trunc, ring).poly, trunc)
    return p


@seed(SEED)
@settings(max_examples=20)
@given(combos)
def test_division_oracle(c):
    """N = sum coeff * prod L(numer + D) / prod L(denom) * U(numer) U(D) / U(denom)."""
    inst = Todd(nu=1)
    cc = clear_denominators(c)
    m = max(len(t.numer) for t in cc.terms)
    T = Trunc(series_cap=m + 3)
    ring = inst.ring_for(list(VARS), m + 3)
    N = numerator_series(cc, inst, T, ring).poly
    D = list(cc.denominator)
    total = ring.zero()
    for t in c.terms:
        lin = Counter(t.numer) + Counter(D)
        lin.subtract(Counter(t.denom))
        L = ring.const(t.coeff)
        for f in lin.elements():
            L = mul_trunc(L, f.to_poly(ring), T)
        low = T.lowered(series=sum(lin.values()))
        up = _unit_product(inst, list(t.numer) + D, ring, low)
        ud = Series(_unit_product(inst, t.denom, ring, low), low)
        total = total + mul_trunc(L, mul_trunc(up, series_inverse(ud).poly, low), T)
    assert total == N


@seed(SEED)
@settings(max_examples=25)
@given(st.lists(forms, min_size=1, max_size=3), st.integers(-3, 3).filter(bool))
def test_gauge_covariance_single_product(fs, coeff):
    t = FactorTerm(coeff, fs, ())
    inst = GenericF(order=3, prefix="c")
    tw = inst.twisted("lam")
    T = Trunc(series_cap=len(fs) + 3)
    ring = tw.ring_for(list(VARS), 3)
    a = term_series(t, tw, ring, T)
    b = term_series(t, inst, ring, T)
    S = ring.zero()
    for L in fs:
        S = S + L.to_poly(ring)
    e = Series(S * ring.gen("lam"), T.lowered(series=len(fs))).exp().poly
    assert a == mul_trunc(b, e, T)


@pytest.mark.parametrize("name", ["blowup", "atiyah", "braid"])
def test_gauge_covariance_scenarios(name):
    s = getattr(B, name)()
    c = s.cleared()
    inst = GenericF(order=3, prefix="c")
    m = max(len(t.numer) for t in c.terms)
    T = Trunc(series_cap=m + 2)
    ring = inst.twisted("lam").ring_for(c.variables(), 3)
    a = numerator_series(c, inst.twisted("lam"), T, ring).poly
    b = numerator_series(c, inst, T, ring).poly
    S = ring.zero()
    for L in c.terms[0].numer:
        S = S + L.to_poly(ring)
    e = Series(S * ring.gen("lam"), T.lowered(series=m)).exp().poly
    assert a == mul_trunc(b, e, T)


def test_clear_denominators_uses_max_multiplicity():
    x, y = LinearForm({"x": 1}), LinearForm({"y": 1})
    c = Combination([FactorTerm(1, [x], [y, y]), FactorTerm(-1, [y], [x, y])])
    cc = clear_denominators(c)
    assert Counter(cc.denominator) == Counter([x, y, y])
    assert [Counter(t.numer) for t in cc.terms] == [Counter([x, x]), Counter([y, y])]


def test_gauge_defect_rejects_inhomogeneous():
    x = LinearForm({"x": 1})
    with pytest.raises(ValueError):
        gauge_defect(Combination([FactorTerm(1, [x], []), FactorTerm(1, [x, x], [])]))


def test_extraction_matches_full_expansion():
    s = B.atiyah()
    c = s.cleared()
    inst = GenericF(prefix="b", fixed={1})
    jmax = 7
    d = dr_coefficients(c, inst, s.recipe, jmax)
    m = max(len(t.numer) for t in c.terms)
    cap = s.recipe.total_order + jmax
    full = numerator_series(c, inst, Trunc(series_cap=max(cap, m))).poly
    for j in range(jmax + 1):
        orders = dict(s.recipe.orders)
        orders[s.recipe.survivor] = j
        want = derivative_at_zero(full, orders, s.recipe.zero)
        want = want * mpq(s.recipe.sign, math.factorial(j))
        assert d[j] == want.to_ring(d[j].ring), j
    assert not d[6].is_zero() and not d[7].is_zero()


def test_parallel_matches_serial():
    s = B.atiyah()
    inst = GenericF(prefix="b", fixed={1})
    one = dr_coefficients(s.cleared(), inst, s.recipe, 8, jobs=1)
    two = dr_coefficients(s.cleared(), inst, s.recipe, 8, jobs=2)
    assert one == two


def test_naive_and_power_sum_terms_agree():
    t = FactorTerm(2, ["x+y", "x-2*z", "y"], ())
    ring = INST.ring_for(list(VARS), 4)
    T = Trunc(series_cap=6)
    assert term_series(t, INST, ring, T) == term_series_naive(t, INST, ring, T)


def test_zero_specialization_drops_terms():
    t = FactorTerm(1, ["x", "y"], ["x+y"])
    assert t.specialize(["x"]) is None
    with pytest.raises(ZeroDivisionError):
        FactorTerm(1, ["y"], ["x"]).specialize(["x"])
