"""The generating function f(x) = x * u(x) and its concrete instances.

Every instance is described by the coefficients g_i of log u(x) = sum g_i x^i.
Products of many f-factors are then cheap: prod f(L_k) = prod L_k * exp(sum_i g_i p_i)
with p_i = sum_k L_k^i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

from gmpy2 import mpq

from . import modular
from .ring import (
    CapError, LinearForm, Poly, Ring, Series, SubstitutionTable, Trunc,
    mul_trunc, natural_key, series_log,
)


@lru_cache(maxsize=None)
def _todd_log(order: int) -> tuple:
    """Coefficients of log((1 - e^{-y})/y) for y^1..y^order."""
    r = Ring(["y"])
    y = r.gen("y")
    u = r.zero()
    for n in range(order + 1):
        u = u + y ** n * mpq((-1) ** n, math.factorial(n + 1))
    L = series_log(Series(u, Trunc(series_cap=order))).poly
    return tuple(L.coefficient({"y": i}) for i in range(1, order + 1))


@lru_cache(maxsize=None)
def _bern_over_h(n: int) -> mpq:
    # 1/(e^h - 1) = sum_n B_n h^{n-1} / n!
    return modular.bernoulli(n) / math.factorial(n)


@dataclass(frozen=True)
class FInstance:
    """Base class.  ``gauge`` names a parameter lambda with f -> e^{lambda x} f."""

    gauge: str | None = field(default=None, kw_only=True)

    # symbol bookkeeping
    def series_vars(self) -> tuple:
        return ()

    def laurent(self) -> tuple:
        return ()

    @property
    def q(self):
        return None

    def params(self, order: int) -> list:
        return [self.gauge] if self.gauge else []

    def max_order(self):
        """Largest i with g_i known, or None if unbounded."""
        return None

    def ring_for(self, series, order: int) -> Ring:
        ser = list(series) + [v for v in self.series_vars() if v not in series]
        return Ring(ser, self.params(order), self.q, self.laurent())

    def _log_coeffs(self, order: int, ring: Ring, trunc: Trunc) -> list:
        raise NotImplementedError

    def log_coeffs(self, order: int, ring: Ring, trunc: Trunc) -> list:
        """[g_1, ..., g_order] as polynomials of ``ring``."""
        mo = self.max_order()
        if mo is not None and order > mo:
            raise CapError(f"{self.label()} unit is known only through x^{mo}; "
                           f"x^{order} requested ({self.cap_hint(order)})", suggested=order)
        g = self._log_coeffs(order, ring, trunc)
        if self.gauge and order >= 1:
            g[0] = g[0] + ring.gen(self.gauge)
        return g

    def cap_hint(self, order: int) -> str:
        return f"needs order >= {order}"

    def twisted(self, lam: str) -> "FInstance":
        return replace(self, gauge=lam)

    def label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class Identity(FInstance):
    def _log_coeffs(self, order, ring, trunc):
        return [ring.zero() for _ in range(order)]


@dataclass(frozen=True)
class GenericF(FInstance):
    """f(x) = x exp(sum_{i<=order} c_i x^i) with symbolic c_i.

    ``fixed`` indices are pinned to 0; ``parity="even"`` keeps only even
    indices.  ``table`` substitutes solved symbols by polynomials in the
    remaining ones.
    """

    order: int | None = None
    prefix: str = "c"
    parity: str = "none"
    fixed: frozenset = frozenset()
    table: SubstitutionTable | None = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if self.parity not in ("none", "even"):
            raise ValueError("parity must be 'none' or 'even'")

    def max_order(self):
        return self.order

    def index_set(self, order: int) -> list:
        top = order if self.order is None else min(order, self.order)
        out = []
        for i in range(1, top + 1):
            if i in self.fixed or (self.parity == "even" and i % 2):
                continue
            out.append(i)
        return out

    def symbol(self, i: int) -> str:
        return f"{self.prefix}{i}"

    def params(self, order):
        names = [self.symbol(i) for i in self.index_set(order)]
        if self.table is not None:
            used = set()
            for n in names:
                if n in self.table:
                    used |= self.table[n].free_symbols()
                else:
                    used.add(n)
            names = sorted(used, key=natural_key)
        return names + super().params(order)

    def _log_coeffs(self, order, ring, trunc):
        g = [ring.zero() for _ in range(order)]
        for i in self.index_set(order):
            n = self.symbol(i)
            if self.table is not None and n in self.table:
                g[i - 1] = self.table[n].to_ring(ring)
            else:
                g[i - 1] = ring.gen(n)
        return g

    def label(self):
        par = ", even" if self.parity == "even" else ""
        return f"Generic({self.prefix}{par})"


@dataclass(frozen=True)
class Todd(FInstance):
    """f(x) = (1 - e^{-nu x})/nu; ``nu`` a rational or a parameter name."""

    nu: object = 1

    def params(self, order):
        extra = [self.nu] if isinstance(self.nu, str) else []
        return extra + super().params(order)

    def _log_coeffs(self, order, ring, trunc):
        nu = ring.gen(self.nu) if isinstance(self.nu, str) else ring.const(self.nu)
        base = _todd_log(order)
        return [nu ** i * base[i - 1] for i in range(1, order + 1)]


@dataclass(frozen=True)
class Gaussian(FInstance):
    """f(x) = x e^{mu x^2}."""

    mu: str = "mu"

    def params(self, order):
        return [self.mu] + super().params(order)

    def _log_coeffs(self, order, ring, trunc):
        g = [ring.zero() for _ in range(order)]
        if order >= 2:
            g[1] = ring.gen(self.mu)
        return g


@dataclass(frozen=True)
class Hirzebruch(FInstance):
    """f(x) = (1-e^{-x})(1-e^{-h})/(1-e^{-(x+h)}), h a Laurent series variable."""

    h: str = "h"

    def series_vars(self):
        return (self.h,)

    def laurent(self):
        return (self.h,)

    def _log_coeffs(self, order, ring, trunc):
        # log u = log((1-e^{-x})/x) - sum_i x^i/i! D^i log(1-e^{-h}) + log(1-e^{-h})
        if trunc.series_cap is None:
            raise CapError("Hirzebruch instance needs a total-degree cap")
        base = _todd_log(order)
        out = []
        for i in range(1, order + 1):
            g = ring.const(base[i - 1])
            # D^{i-1} of sum_n B_n h^{n-1}/n!, keeping total weight n <= series_cap
            for n in range(0, trunc.series_cap + 1):
                c = _bern_over_h(n)
                if not c:
                    continue
                e = n - 1
                fall = math.prod(e - j for j in range(i - 1))
                if not fall:
                    continue
                mono = ring.mono_from_names({self.h: e - (i - 1)})
                g = g - Poly(ring, {mono: c * fall / math.factorial(i)})
            out.append(g)
        return out


@dataclass(frozen=True)
class ThetaRatio(FInstance):
    """f(x) = theta(x)/theta'(0) from the triple product; f(x)/x kept to x^x_cap, q^q_cap."""

    x_cap: int = 8
    q_cap: int = 2
    qvar: str = "q"

    @property
    def q(self):
        return self.qvar

    def max_order(self):
        return self.x_cap

    def cap_hint(self, order):
        return f"needs x-cap >= {order}"

    def _log_coeffs(self, order, ring, trunc):
        if trunc.q_cap is None or trunc.q_cap > self.q_cap:
            raise CapError(f"theta ratio carried to q^{self.q_cap} only", suggested=self.q_cap)
        g = modular.theta_log_unit(order, self.q_cap, "x", self.qvar)
        return [p.to_ring(ring) for p in g]


@dataclass(frozen=True)
class EllipticF(FInstance):
    """f(x) = x exp(sum_i Etilde_i(tau, h) x^i); f(x)/x kept to x^x_cap."""

    x_cap: int = 6
    q_cap: int = 2
    h_floor: int = -6
    h: str = "h"
    qvar: str = "q"

    @property
    def q(self):
        return self.qvar

    def series_vars(self):
        return (self.h,)

    def laurent(self):
        return (self.h,)

    def max_order(self):
        return min(self.x_cap, -self.h_floor)

    def cap_hint(self, order):
        return f"needs x-cap >= {order} and h-floor <= {-order}"

    def _log_coeffs(self, order, ring, trunc):
        if trunc.q_cap is None or trunc.q_cap > self.q_cap:
            raise CapError(f"elliptic f carried to q^{self.q_cap} only", suggested=self.q_cap)
        if trunc.series_cap is None:
            raise CapError("elliptic instance needs a total-degree cap")
        hr = Ring([self.h], q=self.qvar, laurent=[self.h])
        return [modular.elliptic_b(i, self.q_cap, trunc.series_cap, hr).to_ring(ring)
                for i in range(1, order + 1)]


# ---------------------------------------------------------------------------

def _target_ring(inst: FInstance, L: LinearForm, trunc: Trunc, ring: Ring | None):
    if ring is not None:
        return ring
    order = _unit_order(inst, Ring(L.variables() + [v for v in inst.series_vars()
                                                    if v not in L.variables()],
                                   (), inst.q, inst.laurent()), trunc)
    return inst.ring_for(L.variables(), order)


def _unit_order(inst: FInstance, ring: Ring, trunc: Trunc) -> int:
    n = ring.grade_bound(trunc)
    if ring.q_idx is not None:
        n -= trunc.q_cap or 0
    return max(n, 0)


def log_unit_sum(inst: FInstance, forms, ring: Ring, trunc: Trunc) -> Series:
    """sum_i g_i * sum_k L_k^i, with ``forms`` an iterable of (LinearForm, multiplicity)."""
    forms = [(L, k) for L, k in forms if L]
    g = inst.log_coeffs(_unit_order(inst, ring, trunc), ring, trunc)
    total = ring.zero()
    powers = []
    for L, k in forms:
        powers.append((L.to_poly(ring), k))
    cur = [ring.one() for _ in powers]
    for i in range(1, len(g) + 1):
        psum = ring.zero()
        for j, (Lp, k) in enumerate(powers):
            cur[j] = mul_trunc(cur[j], Lp, trunc)
            psum = psum + cur[j] * k
        if g[i - 1]:
            total = total + mul_trunc(g[i - 1], psum, trunc)
    return Series(total, trunc)


def expand_unit(inst: FInstance, L: LinearForm, trunc: Trunc, ring: Ring | None = None) -> Series:
    """u(L) with f(L) = L * u(L)."""
    if not L:
        raise ValueError("linear form must be nonzero")
    ring = _target_ring(inst, L, trunc, ring)
    return log_unit_sum(inst, [(L, 1)], ring, trunc).exp()


def expand_f(inst: FInstance, L: LinearForm, trunc: Trunc, ring: Ring | None = None) -> Series:
    """f(L) truncated; the unit part is computed with caps lowered by deg L = 1."""
    if not L:
        raise ValueError("linear form must be nonzero")
    ring = _target_ring(inst, L, trunc, ring)
    low = trunc.lowered(series=1, regular=1)
    u = expand_unit(inst, L, low, ring)
    return Series(mul_trunc(L.to_poly(ring), u.poly, trunc), trunc, True)


def gauge_twist(inst: FInstance, lam: str) -> FInstance:
    if inst.gauge:
        raise ValueError("instance is already twisted")
    return inst.twisted(lam)
