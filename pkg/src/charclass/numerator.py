"""Signed sums of f-factor quotients and their cleared numerators."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from gmpy2 import mpq

from .genfun import FInstance, expand_f, log_unit_sum
from .ring import (
    CapError, LinearForm, Poly, Ring, Series, Trunc, mul_trunc, natural_key,
)


def _forms(items) -> tuple:
    out = []
    for L in items:
        if not isinstance(L, LinearForm):
            L = LinearForm.parse(L) if isinstance(L, str) else LinearForm(L)
        out.append(L)
    return tuple(sorted(out, key=LinearForm.sort_key))


@dataclass(frozen=True)
class FactorTerm:
    """coeff * prod f(numer) / prod f(denom)."""

    coeff: mpq
    numer: tuple = ()
    denom: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeff", mpq(self.coeff))
        object.__setattr__(self, "numer", _forms(self.numer))
        object.__setattr__(self, "denom", _forms(self.denom))

    def variables(self) -> set:
        out = set()
        for L in self.numer + self.denom:
            out.update(L.variables())
        return out

    def key(self):
        return (tuple(L.sort_key() for L in self.numer), tuple(L.sort_key() for L in self.denom),
                self.coeff)

    def specialize(self, zero=(), rename=None) -> "FactorTerm | None":
        """Set variables in ``zero`` to 0; None if a numerator factor becomes f(0) = 0."""
        num = [L.specialize(zero, rename) for L in self.numer]
        den = [L.specialize(zero, rename) for L in self.denom]
        if any(not L for L in den):
            raise ZeroDivisionError("denominator factor vanishes under specialization")
        if any(not L for L in num):
            return None
        return FactorTerm(self.coeff, num, den)

    def __str__(self):
        def prod(fs):
            return "*".join(f"f({L})" for L in fs) or "1"
        s = prod(self.numer)
        if self.denom:
            s += "/(" + prod(self.denom) + ")"
        c = self.coeff
        if c == 1:
            return s
        if c == -1:
            return "-" + s
        return f"{c}*{s}"


@dataclass(frozen=True)
class Combination:
    """Signed sum of FactorTerms; ``denominator`` is set once cleared."""

    terms: tuple
    denominator: tuple = ()

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty combination")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "denominator", _forms(self.denominator))

    @property
    def cleared(self) -> bool:
        return all(not t.denom for t in self.terms)

    def variables(self) -> list:
        v = set()
        for t in self.terms:
            v |= t.variables()
        return sorted(v, key=natural_key)

    def canonical(self) -> tuple:
        """Order-independent key: sorted multiset of terms."""
        return tuple(sorted(t.key() for t in self.terms))

    def __str__(self):
        out = " + ".join(str(t) for t in self.terms).replace("+ -", "- ")
        return out


def clear_denominators(c: Combination) -> Combination:
    """Multiply through by the max-multiplicity union D of all denominators."""
    D = Counter()
    for t in c.terms:
        for L, k in Counter(t.denom).items():
            if k > D[L]:
                D[L] = k
    out = []
    for t in c.terms:
        rest = D - Counter(t.denom)
        out.append(FactorTerm(t.coeff, t.numer + tuple(rest.elements()), ()))
    return Combination(tuple(out), tuple(D.elements()))


def gauge_defect(c: Combination) -> LinearForm:
    """Common value of sum(denominators) - sum(numerators) over terms."""
    vals = []
    for t in c.terms:
        s = LinearForm({})
        for L in t.denom:
            s = s + L
        for L in t.numer:
            s = s - L
        vals.append(s)
    if any(v != vals[0] for v in vals[1:]):
        raise ValueError("terms have different degrees of homogeneity: "
                         + ", ".join(str(v) for v in vals))
    return vals[0]


# ---------------------------------------------------------------------------

def scenario_ring(c: Combination, inst: FInstance, order: int) -> Ring:
    return inst.ring_for(c.variables(), order)


def _needed_order(c: Combination, inst: FInstance, trunc: Trunc) -> int:
    probe = Ring(c.variables() + [v for v in inst.series_vars() if v not in c.variables()],
                 (), inst.q, inst.laurent())
    n = probe.grade_bound(trunc)
    if probe.q_idx is not None:
        n -= trunc.q_cap or 0
    m = min(len(t.numer) for t in c.terms)
    return max(n - m, 0)


def _linear_product(forms, ring: Ring, trunc: Trunc) -> Poly:
    p = ring.one()
    for L in forms:
        p = mul_trunc(p, L.to_poly(ring), trunc)
    return p


def term_series(t: FactorTerm, inst: FInstance, ring: Ring, trunc: Trunc) -> Poly:
    """coeff * prod L_k * exp(sum_i g_i p_i), truncated."""
    m = len(t.numer)
    low = trunc.lowered(series=m, regular=m)
    P = log_unit_sum(inst, Counter(t.numer).items(), ring, low)
    E = P.exp() if P.poly else Series(ring.one(), low)
    lin = _linear_product(t.numer, ring, trunc)
    return mul_trunc(lin, E.poly, trunc) * t.coeff


def term_series_naive(t: FactorTerm, inst: FInstance, ring: Ring, trunc: Trunc) -> Poly:
    """Oracle: literal product of expand_f factors."""
    m = len(t.numer)
    # the other m - 1 factors each start in degree 1
    each = trunc.lowered(series=m - 1, regular=m - 1)
    p = ring.const(t.coeff)
    for L in t.numer:
        p = mul_trunc(p, expand_f(inst, L, each, ring).poly, trunc)
    return p


def _worker(args):
    t, inst, ring, trunc, naive = args
    fn = term_series_naive if naive else term_series
    return fn(t, inst, ring, trunc).terms


def numerator_series(c: Combination, inst: FInstance, trunc: Trunc, ring: Ring | None = None,
                     jobs: int = 1, naive: bool = False) -> Series:
    """sum coeff * prod f(L) over a cleared combination, truncated."""
    if not c.cleared:
        raise ValueError("combination still carries denominators; clear them first")
    ring = ring or scenario_ring(c, inst, _needed_order(c, inst, trunc))
    total = ring.zero()
    if jobs > 1 and len(c.terms) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_worker, [(t, inst, ring, trunc, naive) for t in c.terms]))
        for d in parts:
            total = total + Poly(ring, d)
    else:
        fn = term_series_naive if naive else term_series
        for t in c.terms:
            total = total + fn(t, inst, ring, trunc)
    return Series(total, trunc, True)


# ---------------------------------------------------------------------------
# derivative extraction

@dataclass(frozen=True)
class DRRecipe:
    """sign * prod_v (d/dv)^{k_v} at the zero set, leaving a series in ``survivor``."""

    orders: tuple
    zero: tuple = ()
    survivor: str = "x"
    rename: str | None = None
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(dict(self.orders).items()))
        object.__setattr__(self, "zero", tuple(self.zero))
        if self.survivor in self.zero or self.survivor in dict(self.orders):
            raise ValueError("survivor must not be differentiated or zeroed")

    @property
    def order_map(self) -> dict:
        return dict(self.orders)

    @property
    def total_order(self) -> int:
        return sum(k for _, k in self.orders)

    @property
    def out_var(self) -> str:
        return self.rename or self.survivor


def dr_cap(recipe: DRRecipe, jmax: int) -> int:
    return recipe.total_order + jmax


def _extract_term(t: FactorTerm, inst: FInstance, ring: Ring, recipe: DRRecipe, jmax: int):
    """{j: coefficient Poly} of survivor^j in the recipe's derivative of one term."""
    orders = recipe.order_map
    sv = recipe.survivor
    vc = dict(orders)
    vc[sv] = jmax
    cap = dr_cap(recipe, jmax)
    trunc = Trunc(series_cap=cap, var_caps=tuple(vc.items()))
    m = len(t.numer)
    low = trunc.lowered(series=m)
    P = log_unit_sum(inst, Counter(t.numer).items(), ring, low)
    E = P.exp().poly if P.poly else ring.one()
    lin = _linear_product(t.numer, ring, trunc)
    keys = list(orders) + [sv]
    Eg = E.collect(keys)
    Lg = lin.collect(keys)
    target = tuple(orders[k] for k in orders)
    out: dict = {}
    for key, cl in Lg.items():
        need = tuple(a - b for a, b in zip(target, key[:-1]))
        if any(e < 0 for e in need):
            continue
        c0 = cl.constant_term() * t.coeff
        for j in range(key[-1], jmax + 1):
            ce = Eg.get(need + (j - key[-1],))
            if ce is None:
                continue
            out[j] = out.get(j, ring.zero()) + ce * c0
    return out


def _extract_worker(args):
    t, inst, ring, recipe, jmax = args
    return {j: p.terms for j, p in _extract_term(t, inst, ring, recipe, jmax).items()}


def dr_coefficients(c: Combination, inst: FInstance, recipe: DRRecipe, jmax: int,
                    jobs: int = 1) -> dict:
    """{j: d_j}: survivor^j coefficients of prod(k_v!) * [prod v^k_v] numerator.

    Variables in ``recipe.zero`` are set to 0 before expansion, which is exact
    for coefficient extraction; the numerator is never formed in full.
    """
    if not c.cleared:
        raise ValueError("combination still carries denominators; clear them first")
    if inst.series_vars():
        raise ValueError("derivative extraction needs an instance without series variables")
    terms = [t.specialize(recipe.zero) for t in c.terms]
    terms = [t for t in terms if t is not None]
    keep = [v for v in c.variables() if v not in recipe.zero]
    m = min(len(t.numer) for t in terms)
    order = max(dr_cap(recipe, jmax) - m, 0)
    ring = inst.ring_for(keep, order)
    acc: dict = {}
    if jobs > 1 and len(terms) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_extract_worker, [(t, inst, ring, recipe, jmax) for t in terms]))
        parts = [{j: Poly(ring, d) for j, d in p.items()} for p in parts]
    else:
        parts = [_extract_term(t, inst, ring, recipe, jmax) for t in terms]
    for p in parts:
        for j, v in p.items():
            acc[j] = acc.get(j, ring.zero()) + v
    scale = recipe.sign * math.prod(math.factorial(k) for _, k in recipe.orders)
    pr = Ring(params=inst.params(order), q=inst.q)
    out = {}
    for j in range(jmax + 1):
        v = acc.get(j)
        out[j] = pr.zero() if v is None else (v * scale).to_ring(pr)
    return out


def dr_series(c: Combination, inst: FInstance, recipe: DRRecipe, jmax: int, jobs: int = 1) -> Series:
    """The extracted coefficients reassembled as a series in the survivor variable."""
    d = dr_coefficients(c, inst, recipe, jmax, jobs)
    base = next(iter(d.values())).ring
    ring = base.extend(series=[recipe.out_var])
    v = ring.gen(recipe.out_var)
    total = ring.zero()
    for j, p in d.items():
        total = total + p.to_ring(ring) * v ** j
    return Series(total, Trunc(series_cap=jmax))
