"""Localization sums and invariance relations as Combinations."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..numerator import Combination, DRRecipe, FactorTerm, clear_denominators
from ..ring import LinearForm


def F(u: str, v: str) -> tuple:
    """F(u, v) = f(u+v) / (f(u) f(v)) as (numerator, denominators)."""
    U, V = LinearForm.parse(u), LinearForm.parse(v)
    return [U + V], [U, V]


def F_product(coeff, *pairs) -> FactorTerm:
    num, den = [], []
    for u, v in pairs:
        n, d = F(u, v)
        num += n
        den += d
    return FactorTerm(coeff, num, den)


@dataclass(frozen=True)
class Scenario:
    name: str
    combination: Combination
    recipe: DRRecipe | None = None
    family: str = ""
    free: tuple = ()
    fixed: frozenset = frozenset()
    parity: str = "none"
    params: dict = field(default_factory=dict, compare=False)

    def cleared(self) -> Combination:
        return clear_denominators(self.combination)


def baby() -> Scenario:
    c = Combination((
        FactorTerm(1, (), ["x1", "x2-x1"]),
        FactorTerm(1, (), ["x2", "x1-x2"]),
        FactorTerm(-1, (), ["x1", "x2"]),
    ))
    return Scenario("baby", c, DRRecipe({"x2": 1}, (), "x1", "x"), "c", ("c1",))


def blowup() -> Scenario:
    c = Combination((
        F_product(1, ("x", "a+b"), ("y-x", "b")),
        F_product(1, ("y", "a+b"), ("x-y", "a")),
        F_product(-1, ("x", "a"), ("y", "b")),
    ))
    # the reduced numerator's derivative is minus the closed expression; report the latter
    return Scenario("blowup", c, DRRecipe({"y": 2, "a": 2, "b": 2}, (), "x", sign=-1), "a",
                    ("a4", "a6"), frozenset({2}), "even")


def braid() -> Scenario:
    # z1 = mu1 = 0
    c = Combination((
        F_product(1, ("z2", "mu3-mu2"), ("z3-z2", "mu3"), ("z2", "mu2")),
        F_product(1, ("-z2", "h"), ("z3", "mu3"), ("z2", "h")),
        F_product(-1, ("z3-z2", "mu2"), ("z2", "mu3"), ("z3-z2", "mu3-mu2")),
        F_product(-1, ("z2-z3", "h"), ("z3", "mu3"), ("z3-z2", "h")),
    ))
    return Scenario("braid", c, None, "a", ("a2", "a4", "a6"), frozenset(), "even")


ATIYAH_FIXED_POINTS = {
    "X1": (("t1-t2", "s1+t2", "s2+t2"), ("t2-t1", "s1+t1", "s2+t1")),
    "X2": (("s2-s1", "s1+t1", "s1+t2"), ("s1-s2", "s2+t1", "s2+t2")),
}


def atiyah() -> Scenario:
    terms = []
    for sign, side in ((1, "X1"), (-1, "X2")):
        for weights in ATIYAH_FIXED_POINTS[side]:
            terms.append(FactorTerm(sign, (), weights))
    return Scenario("atiyah", Combination(tuple(terms)),
                    DRRecipe({"s1": 2, "s2": 2}, ("t1",), "t2", "t"), "b",
                    ("b2", "b3", "b4"), frozenset({1}))


def grassmann_sums(n: int) -> tuple:
    """(S1 terms, S2 terms), each a list of denominator tuples."""
    xs = [f"x{i}" for i in range(1, n + 1)]
    s1, s2 = [], []
    for p in range(n):
        d1, d2 = [], []
        for i in range(n):
            if i == p:
                continue
            d1 += [f"{xs[i]}-{xs[p]}", f"{xs[p]}-{xs[i]}+s"]
            d2 += [f"{xs[p]}-{xs[i]}", f"{xs[i]}-{xs[p]}+s"]
        s1.append(tuple(d1))
        s2.append(tuple(d2))
    return s1, s2


GRASSMANN_ORDERS = {3: {"x1": 4, "x2": 5}, 4: {"x1": 5, "x2": 5, "x3": 5}}


def grassmann(n: int = 3, orders: dict | None = None, allow_large: bool = False) -> Scenario:
    if n < 2:
        raise ValueError("n must be >= 2")
    if n not in GRASSMANN_ORDERS and not (allow_large and orders):
        raise ValueError(f"grassmann n={n} unsupported (n=5 needs allow_large and explicit orders)")
    s1, s2 = grassmann_sums(n)
    terms = [FactorTerm(1, (), d) for d in s1] + [FactorTerm(-1, (), d) for d in s2]
    orders = orders or GRASSMANN_ORDERS[n]
    zero = tuple(f"x{i}" for i in range(1, n + 1) if f"x{i}" not in orders)
    return Scenario(f"grassmann{n}", Combination(tuple(terms)),
                    DRRecipe(orders, zero, "s"), "b", tuple(f"b{i}" for i in range(2, 8)),
                    frozenset({1}), params={"n": n})


def build(name: str, **params) -> Scenario:
    builders = {"baby": baby, "blowup": blowup, "braid": braid, "atiyah": atiyah,
                "grassmann": grassmann}
    if name not in builders:
        raise ValueError(f"unknown scenario {name!r}")
    return builders[name](**params)


# ---------------------------------------------------------------------------

def _flip_negative(t: FactorTerm) -> FactorTerm:
    """Use f(-L) = -f(L) so that every form has a positive leading coefficient."""
    sign = 1
    out = []
    for L in t.numer:
        if L.coeffs[0][1] < 0:
            sign = -sign
            L = -L
        out.append(L)
    return FactorTerm(t.coeff * sign, out, t.denom)


def fay_reduce(s: Scenario) -> Combination:
    """Divide the cleared blow-up numerator by f(x - y), using oddness of f."""
    if s.name != "blowup":
        raise ValueError("fay_reduce applies to the blow-up relation only")
    c = s.cleared()
    xy = LinearForm.parse("x-y")
    out = []
    for t in c.terms:
        num = Counter(t.numer)
        coeff = t.coeff
        if num[xy]:
            num[xy] -= 1
        elif num[-xy]:
            num[-xy] -= 1
            coeff = -coeff
        else:
            raise ValueError(f"term {t} has no f(x-y) factor")
        out.append(_flip_negative(FactorTerm(coeff, tuple(num.elements()), ())))
    return Combination(tuple(out))


def blowup_r0_printed() -> Combination:
    return Combination((
        FactorTerm(-1, ["a+b", "x-y", "y-x", "a+x", "b+y"]),
        FactorTerm(1, ["b", "x", "y-x", "a+x-y", "a+b+y"]),
        FactorTerm(1, ["a", "x-y", "y", "a+b+x", "b-x+y"]),
    ))


def blowup_r_printed() -> Combination:
    return Combination((
        FactorTerm(1, ["a+b", "x-y", "a+x", "b+y"]),
        FactorTerm(-1, ["b", "x", "a+x-y", "a+b+y"]),
        FactorTerm(1, ["a", "y", "a+b+x", "b-x+y"]),
    ))


def atiyah_r_printed() -> Combination:
    return Combination((
        FactorTerm(1, ["s1-s2", "s2-s1", "t1-t2", "s1+t2", "s2+t2"]),
        FactorTerm(1, ["s1-s2", "s2-s1", "t2-t1", "s1+t1", "s2+t1"]),
        FactorTerm(-1, ["s2-s1", "t1-t2", "t2-t1", "s1+t1", "s1+t2"]),
        FactorTerm(-1, ["s1-s2", "t1-t2", "t2-t1", "s2+t1", "s2+t2"]),
    ))


def baby_numerator_recomputed() -> Combination:
    return Combination((
        FactorTerm(1, ["x2", "x1-x2"]),
        FactorTerm(1, ["x1", "x2-x1"]),
        FactorTerm(-1, ["x1-x2", "x2-x1"]),
    ))


def baby_numerator_printed() -> Combination:
    return Combination((
        FactorTerm(1, ["x2", "x2-x1"]),
        FactorTerm(1, ["x1", "x2-x1"]),
        FactorTerm(-1, ["x1-x2", "x2-x1"]),
    ))
