"""Exact sparse multivariate polynomials and truncated series over Q.

Monomials are packed into a single Python integer: every symbol owns a
16-bit field holding ``exponent + BIAS``, followed by three aggregate fields
(total series degree, degree in the non-Laurent series variables, and the
grade used by exp/log/inverse).  Multiplying monomials is then one integer
addition, and truncation caps are checked with a guard-bit mask.

Coefficients are ``gmpy2.mpq`` (always in lowest terms).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from gmpy2 import mpq

__all__ = [
    "Rational", "Q", "Symbol", "Ring", "Poly", "Trunc", "Series", "LinearForm",
    "SubstitutionTable", "CapError", "LaurentUnderflow", "SolveError",
    "ZeroCoefficientError", "NonConstantCoefficientError", "NonlinearError",
    "CycleError", "derivative_at_zero", "solve_linear_symbol",
    "apply_substitutions", "canonical_serialize", "parse_poly", "natural_key",
    "substitute_linear", "series_exp", "series_log", "series_inverse",
]

Rational = mpq

_W = 16
_BIAS = 1 << 12
_MASK = (1 << _W) - 1
_GUARD = 1 << (_W - 1)

SERIES, PARAM, QVAR = "series", "param", "q"


class CapError(ValueError):
    """Truncation caps are too small (or unbounded) for the requested operation."""

    def __init__(self, msg, suggested=None):
        super().__init__(msg)
        self.suggested = suggested


class LaurentUnderflow(ArithmeticError):
    pass


class SolveError(ValueError):
    pass


class ZeroCoefficientError(SolveError):
    pass


class NonConstantCoefficientError(SolveError):
    pass


class NonlinearError(SolveError):
    pass


class CycleError(SolveError):
    pass


def Q(x) -> mpq:
    """Coerce int, Fraction, str ("p/q") or mpq to mpq; floats are refused."""
    if isinstance(x, float) or type(x).__name__ == "mpfr":
        raise TypeError(f"inexact coefficient {x!r}")
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


_nat = re.compile(r"(\d+)")


def natural_key(name: str):
    """Sort key putting a2 < a10 and x1 < x2."""
    return tuple(int(p) if p.isdigit() else p for p in _nat.split(name))


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str = PARAM
    laurent: bool = False


class Ring:
    """An ordered symbol table fixing the packed monomial layout."""

    _cache: dict = {}

    def __new__(cls, series=(), params=(), q=None, laurent=()):
        laurent = frozenset(laurent)
        syms = [Symbol(n, SERIES, n in laurent) for n in series]
        syms += [Symbol(n, PARAM) for n in params]
        if q:
            syms.append(Symbol(q, QVAR))
        key = tuple(syms)
        ring = cls._cache.get(key)
        if ring is not None:
            return ring
        names = [s.name for s in syms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate symbol names in {names}")
        bad = laurent - set(series)
        if bad:
            raise ValueError(f"laurent symbols must be series vars: {sorted(bad)}")
        ring = super().__new__(cls)
        ring._setup(key)
        cls._cache[key] = ring
        return ring

    def __getnewargs__(self):
        return (
            tuple(s.name for s in self.symbols if s.kind == SERIES),
            tuple(s.name for s in self.symbols if s.kind == PARAM),
            self.q,
            tuple(s.name for s in self.symbols if s.laurent),
        )

    def __getstate__(self):
        return None

    def __setstate__(self, state):
        pass

    def _setup(self, symbols):
        self.symbols = symbols
        self.names = tuple(s.name for s in symbols)
        self.index = {s.name: i for i, s in enumerate(symbols)}
        self.nvars = n = len(symbols)
        self.series_idx = tuple(i for i, s in enumerate(symbols) if s.kind == SERIES)
        self.regular_idx = tuple(i for i in self.series_idx if not symbols[i].laurent)
        self.laurent_idx = tuple(i for i in self.series_idx if symbols[i].laurent)
        self.param_idx = tuple(i for i, s in enumerate(symbols) if s.kind == PARAM)
        qs = [i for i, s in enumerate(symbols) if s.kind == QVAR]
        self.q_idx = qs[0] if qs else None
        self.q = symbols[qs[0]].name if qs else None
        self.TOT, self.REG, self.GRADE = n, n + 1, n + 2
        self.nfields = n + 3
        self.bias = sum(_BIAS << (_W * k) for k in range(self.nfields))
        self.one_mono = self.bias
        self._grade_weights = [0] * n
        for i in self.regular_idx:
            self._grade_weights[i] = 1
        if self.q_idx is not None:
            self._grade_weights[self.q_idx] = 1
        self._trunc_cache = {}

    def __repr__(self):
        parts = []
        for s in self.symbols:
            tag = {SERIES: "s", PARAM: "p", QVAR: "q"}[s.kind]
            parts.append(f"{s.name}:{tag}{'L' if s.laurent else ''}")
        return f"Ring({', '.join(parts)})"

    # -- packing ---------------------------------------------------------
    def pack(self, exps) -> int:
        if len(exps) != self.nvars:
            raise ValueError("exponent vector length mismatch")
        m = self.bias
        tot = reg = grade = 0
        for i, e in enumerate(exps):
            if e:
                if not -_BIAS <= e < _BIAS:
                    raise OverflowError(f"exponent {e} out of range")
                m += e << (_W * i)
                kind = self.symbols[i]
                if kind.kind == SERIES:
                    tot += e
                    if not kind.laurent:
                        reg += e
                grade += self._grade_weights[i] * e
        m += (tot << (_W * self.TOT)) + (reg << (_W * self.REG)) + (grade << (_W * self.GRADE))
        return m

    def unpack(self, m: int) -> tuple:
        return tuple(((m >> (_W * i)) & _MASK) - _BIAS for i in range(self.nvars))

    def field(self, m: int, k: int) -> int:
        return ((m >> (_W * k)) & _MASK) - _BIAS

    def exponent(self, m: int, name: str) -> int:
        return self.field(m, self.index[name])

    def grade(self, m: int) -> int:
        return self.field(m, self.GRADE)

    def series_degree(self, m: int) -> int:
        return self.field(m, self.TOT)

    def mono(self, **exps) -> int:
        v = [0] * self.nvars
        for k, e in exps.items():
            v[self.index[k]] = e
        return self.pack(v)

    def mono_from_names(self, exps: Mapping[str, int]) -> int:
        v = [0] * self.nvars
        for k, e in exps.items():
            v[self.index[k]] = e
        return self.pack(v)

    # -- constructors ----------------------------------------------------
    def zero(self) -> "Poly":
        return Poly(self, {})

    def one(self) -> "Poly":
        return Poly(self, {self.one_mono: mpq(1)})

    def const(self, c) -> "Poly":
        c = Q(c)
        return Poly(self, {self.one_mono: c} if c else {})

    def gen(self, name: str) -> "Poly":
        return Poly(self, {self.mono_from_names({name: 1}): mpq(1)})

    def gens(self, *names):
        return tuple(self.gen(n) for n in names)

    def kind(self, name: str) -> str:
        return self.symbols[self.index[name]].kind

    def has(self, name: str) -> bool:
        return name in self.index

    def extend(self, series=(), params=(), q=None, laurent=()) -> "Ring":
        """A ring containing this one's symbols plus the given new ones."""
        cur_series = [s.name for s in self.symbols if s.kind == SERIES]
        cur_params = [s.name for s in self.symbols if s.kind == PARAM]
        cur_laur = {s.name for s in self.symbols if s.laurent}
        ser = cur_series + [n for n in series if n not in self.index]
        par = cur_params + [n for n in params if n not in self.index]
        if q and self.q and q != self.q:
            raise ValueError("ring already has a different q variable")
        return Ring(ser, par, q or self.q, cur_laur | set(laurent))

    @staticmethod
    def union(*rings: "Ring") -> "Ring":
        ser, par, laur, qv = [], [], set(), None
        kinds = {}
        for r in rings:
            for s in r.symbols:
                if s.name in kinds and kinds[s.name] != s.kind:
                    raise ValueError(f"symbol {s.name} has conflicting kinds")
                if s.name not in kinds:
                    kinds[s.name] = s.kind
                    if s.kind == SERIES:
                        ser.append(s.name)
                    elif s.kind == PARAM:
                        par.append(s.name)
                    else:
                        if qv and qv != s.name:
                            raise ValueError("two different q variables")
                        qv = s.name
                if s.laurent:
                    laur.add(s.name)
        return Ring(ser, par, qv, laur)

    # -- truncation compilation ------------------------------------------
    def compile_trunc(self, trunc: "Trunc"):
        hit = self._trunc_cache.get(trunc)
        if hit is not None:
            return hit
        caps = []
        if trunc.series_cap is not None:
            caps.append((self.TOT, trunc.series_cap))
        if trunc.regular_cap is not None:
            caps.append((self.REG, trunc.regular_cap))
        if trunc.q_cap is not None and self.q_idx is not None:
            caps.append((self.q_idx, trunc.q_cap))
        for name, cap in trunc.var_caps:
            if name in self.index:
                caps.append((self.index[name], cap))
        K = G = 0
        for f, cap in caps:
            if cap < -_BIAS:
                raise ValueError("cap out of range")
            K += (_GUARD - 1 - (cap + _BIAS)) << (_W * f)
            G += _GUARD << (_W * f)
        K2 = G2 = 0
        for name, floor in trunc.floors:
            if name in self.index:
                K2 += (_GUARD - (floor + _BIAS)) << (_W * self.index[name])
                G2 += _GUARD << (_W * self.index[name])
        out = (K, G, K2, G2)
        self._trunc_cache[trunc] = out
        return out

    def grade_bound(self, trunc: "Trunc") -> int:
        """Largest grade a monomial admissible under ``trunc`` can have."""
        bounds = []
        if trunc.regular_cap is not None:
            bounds.append(trunc.regular_cap)
        if trunc.series_cap is not None:
            floors = dict(trunc.floors)
            lo = 0
            for i in self.laurent_idx:
                name = self.names[i]
                if name not in floors:
                    lo = None
                    break
                lo += floors[name]
            if lo is not None:
                bounds.append(trunc.series_cap - lo)
        vc = dict(trunc.var_caps)
        if all(self.names[i] in vc for i in self.regular_idx):
            bounds.append(sum(vc[self.names[i]] for i in self.regular_idx))
        if not self.regular_idx:
            bounds.append(0)
        if not bounds:
            raise CapError("series degree is unbounded under this truncation")
        b = min(bounds)
        if self.q_idx is not None:
            qc = trunc.q_cap if trunc.q_cap is not None else vc.get(self.q)
            if qc is None:
                raise CapError("q-degree is unbounded under this truncation")
            b += qc
        return b


# ---------------------------------------------------------------------------
# raw dict kernels (monomial int -> mpq)

def _add_into(acc: dict, src: dict, scale=None):
    get = acc.get
    if scale is None:
        for m, c in src.items():
            v = get(m)
            if v is None:
                acc[m] = c
            else:
                v += c
                if v:
                    acc[m] = v
                else:
                    del acc[m]
    else:
        for m, c in src.items():
            c = c * scale
            v = get(m)
            if v is None:
                acc[m] = c
            else:
                v += c
                if v:
                    acc[m] = v
                else:
                    del acc[m]


def _mul_into(acc: dict, A: dict, B: dict, bias: int, K: int = 0, G: int = 0, scale=None):
    """acc += scale * A * B, dropping monomials that violate the guard mask."""
    if len(A) > len(B):
        A, B = B, A
    items_b = list(B.items())
    get = acc.get
    for ma, ca in A.items():
        if scale is not None:
            ca = ca * scale
        base = ma - bias
        if G:
            for mb, cb in items_b:
                m = base + mb
                if (m + K) & G:
                    continue
                v = get(m)
                if v is None:
                    acc[m] = ca * cb
                else:
                    v += ca * cb
                    acc[m] = v
        else:
            for mb, cb in items_b:
                m = base + mb
                v = get(m)
                if v is None:
                    acc[m] = ca * cb
                else:
                    acc[m] = v + ca * cb
    return acc


def _clean(d: dict) -> dict:
    return {m: c for m, c in d.items() if c}


def _filter(d: dict, K: int, G: int) -> dict:
    if not G:
        return dict(d)
    return {m: c for m, c in d.items() if not (m + K) & G}


def _check_floor(d: dict, K2: int, G2: int):
    if G2:
        for m in d:
            if ((m + K2) & G2) != G2:
                raise LaurentUnderflow("product exponent below Laurent floor")


# ---------------------------------------------------------------------------

class Poly:
    """Immutable sparse polynomial (Laurent exponents allowed) over Q."""

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: Ring, terms: dict):
        self.ring = ring
        self.terms = terms

    @classmethod
    def from_dict(cls, ring: Ring, data: Mapping) -> "Poly":
        """Build from {exponent mapping or tuple: coefficient}."""
        out = {}
        for k, c in data.items():
            c = Q(c)
            if not c:
                continue
            if isinstance(k, Mapping):
                m = ring.mono_from_names(k)
            else:
                m = ring.pack(tuple(k))
            out[m] = out.get(m, 0) + c
        return cls(ring, _clean(out))

    # -- basic protocol ----------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.ring is self.ring:
                return other
            return other.to_ring(self.ring)
        if isinstance(other, Series):
            return other.poly.to_ring(self.ring)
        return self.ring.const(other)

    def __add__(self, other):
        if isinstance(other, Series):
            return NotImplemented
        o = self._coerce(other)
        d = dict(self.terms)
        _add_into(d, o.terms)
        return Poly(self.ring, d)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, Series):
            return NotImplemented
        o = self._coerce(other)
        d = dict(self.terms)
        _add_into(d, o.terms, mpq(-1))
        return Poly(self.ring, d)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Series):
            return NotImplemented
        if not isinstance(other, Poly):
            c = Q(other)
            if not c:
                return self.ring.zero()
            return Poly(self.ring, {m: v * c for m, v in self.terms.items()})
        o = self._coerce(other)
        d = _mul_into({}, self.terms, o.terms, self.ring.bias)
        return Poly(self.ring, _clean(d))

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = Q(other)
        if not c:
            raise ZeroDivisionError
        return self * (1 / c)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            exps = self.ring.unpack(m)
            return Poly(self.ring, {self.ring.pack(tuple(e * k for e in exps)): c ** k})
        result = self.ring.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Series):
            other = other.poly
        if isinstance(other, Poly):
            if other.ring is self.ring:
                return self.terms == other.terms
            return self.name_dict() == other.name_dict()
        try:
            c = Q(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.terms == ({self.ring.one_mono: c} if c else {})

    def __hash__(self):
        return hash(frozenset(self.name_dict().items()))

    def __repr__(self):
        return f"Poly({canonical_serialize(self)!r})"

    def __str__(self):
        return canonical_serialize(self)

    # -- inspection ------------------------------------------------------
    def name_dict(self) -> dict:
        """{frozenset((name, exp), ...): coeff}, ring independent."""
        names = self.ring.names
        out = {}
        for m, c in self.terms.items():
            exps = self.ring.unpack(m)
            out[frozenset((names[i], e) for i, e in enumerate(exps) if e)] = c
        return out

    def items(self):
        """Yield (exponent tuple, coefficient)."""
        for m, c in self.terms.items():
            yield self.ring.unpack(m), c

    def free_symbols(self) -> set:
        seen = [False] * self.ring.nvars
        for m in self.terms:
            for i, e in enumerate(self.ring.unpack(m)):
                if e:
                    seen[i] = True
        return {self.ring.names[i] for i, s in enumerate(seen) if s}

    def constant_term(self) -> mpq:
        return self.terms.get(self.ring.one_mono, mpq(0))

    def is_constant(self) -> bool:
        return all(m == self.ring.one_mono for m in self.terms)

    def coefficient(self, exps: Mapping[str, int]) -> mpq:
        return self.terms.get(self.ring.mono_from_names(exps), mpq(0))

    def degree(self, name: str) -> int:
        i = self.ring.index[name]
        return max((self.ring.field(m, i) for m in self.terms), default=-1)

    def min_degree(self, name: str) -> int:
        i = self.ring.index[name]
        return min((self.ring.field(m, i) for m in self.terms), default=0)

    def series_degrees(self):
        tot = [self.ring.field(m, self.ring.TOT) for m in self.terms]
        return (min(tot), max(tot)) if tot else (0, -1)

    def coeff_of(self, name: str, k: int) -> "Poly":
        """Coefficient of name^k, as a polynomial without ``name``."""
        r = self.ring
        i = r.index[name]
        out = {}
        for m, c in self.terms.items():
            if r.field(m, i) == k:
                out[_strip(r, m, i, k)] = c
        return Poly(r, out)

    def collect(self, names: Iterable[str]) -> dict:
        """Split into {exponent tuple over ``names``: coefficient Poly}."""
        r = self.ring
        idx = [r.index[n] for n in names]
        groups: dict = {}
        for m, c in self.terms.items():
            key = tuple(r.field(m, i) for i in idx)
            mm = m
            for i, e in zip(idx, key):
                if e:
                    mm = _strip(r, mm, i, e)
            groups.setdefault(key, {})[mm] = c
        return {k: Poly(r, v) for k, v in groups.items()}

    def to_ring(self, ring: Ring, rename: Mapping[str, str] | None = None) -> "Poly":
        if ring is self.ring and not rename:
            return self
        rename = rename or {}
        src = self.ring
        target = []
        for n in src.names:
            t = rename.get(n, n)
            target.append(ring.index.get(t))
        out = {}
        for m, c in self.terms.items():
            exps = src.unpack(m)
            v = [0] * ring.nvars
            for i, e in enumerate(exps):
                if e:
                    j = target[i]
                    if j is None:
                        raise ValueError(f"symbol {src.names[i]} missing from target ring")
                    v[j] += e
            mm = ring.pack(v)
            out[mm] = out.get(mm, 0) + c
        return Poly(ring, _clean(out))

    def subs(self, mapping: Mapping[str, "Poly | int | Fraction"]) -> "Poly":
        """Simultaneous substitution of symbols by polynomials of the same ring."""
        r = self.ring
        if not mapping:
            return self
        idx = []
        vals = []
        for name, val in mapping.items():
            if name not in r.index:
                continue
            idx.append(r.index[name])
            vals.append(val if isinstance(val, Poly) else r.const(val))
        if not idx:
            return self
        pw_cache = [dict() for _ in idx]

        def power(j, e):
            cache = pw_cache[j]
            p = cache.get(e)
            if p is None:
                if e < 0:
                    raise ValueError("cannot substitute into a negative power")
                p = vals[j] ** e
                cache[e] = p
            return p

        groups: dict = {}
        for m, c in self.terms.items():
            key = tuple(r.field(m, i) for i in idx)
            mm = m
            for i, e in zip(idx, key):
                if e:
                    mm = _strip(r, mm, i, e)
            groups.setdefault(key, {})[mm] = c
        acc: dict = {}
        for key, rest in groups.items():
            factor = r.one()
            for j, e in enumerate(key):
                if e:
                    factor = factor * power(j, e)
            _mul_into(acc, rest, factor.terms, r.bias)
        return Poly(r, _clean(acc))

    def diff(self, name: str, k: int = 1) -> "Poly":
        """Formal k-th derivative with respect to ``name``."""
        r = self.ring
        i = r.index[name]
        out = {}
        for m, c in self.terms.items():
            e = r.field(m, i)
            f = 1
            for j in range(k):
                f *= e - j
            if f:
                out[_strip(r, m, i, k)] = c * f
        return Poly(r, out)

    def shift(self, name: str, k: int) -> "Poly":
        """Multiply by name**k (k may be negative)."""
        return self * Poly(self.ring, {self.ring.mono_from_names({name: k}): mpq(1)})

    def map_coeffs(self, fn) -> "Poly":
        return Poly(self.ring, _clean({m: Q(fn(c)) for m, c in self.terms.items()}))


def _strip(r: Ring, m: int, i: int, e: int) -> int:
    """Remove exponent e of variable i from packed monomial m (fix aggregates)."""
    m -= e << (_W * i)
    s = r.symbols[i]
    if s.kind == SERIES:
        m -= e << (_W * r.TOT)
        if not s.laurent:
            m -= e << (_W * r.REG)
    w = r._grade_weights[i]
    if w:
        m -= (w * e) << (_W * r.GRADE)
    return m


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trunc:
    """Truncation caps.

    ``series_cap`` bounds the total degree over all series variables (Laurent
    ones included), ``regular_cap`` the total degree over non-Laurent series
    variables, ``q_cap`` the q-degree and ``var_caps`` single variables.
    ``floors`` give the lowest exponent allowed for Laurent variables; going
    below raises ``LaurentUnderflow``.  Every cap is an ideal truncation as
    long as all terms have nonnegative degree in the capped quantity.
    """

    series_cap: int | None = None
    q_cap: int | None = None
    regular_cap: int | None = None
    var_caps: tuple = ()
    floors: tuple = ()

    def __post_init__(self):
        for c in (self.series_cap, self.q_cap, self.regular_cap):
            if c is not None and c < 0:
                raise ValueError("caps must be >= 0")
        object.__setattr__(self, "var_caps", tuple(sorted(dict(self.var_caps).items())))
        object.__setattr__(self, "floors", tuple(sorted(dict(self.floors).items())))
        if any(c < 0 for _, c in self.var_caps):
            raise ValueError("caps must be >= 0")

    def merge(self, other: "Trunc") -> "Trunc":
        if self == other:
            return self
        if dict(self.floors) != dict(other.floors):
            raise ValueError("incompatible Laurent floors")

        def mn(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return min(a, b)

        vc = dict(self.var_caps)
        for k, v in other.var_caps:
            vc[k] = mn(vc.get(k), v)
        return Trunc(mn(self.series_cap, other.series_cap), mn(self.q_cap, other.q_cap),
                     mn(self.regular_cap, other.regular_cap), tuple(vc.items()), self.floors)

    def replace(self, **kw) -> "Trunc":
        d = dict(series_cap=self.series_cap, q_cap=self.q_cap, regular_cap=self.regular_cap,
                 var_caps=self.var_caps, floors=self.floors)
        d.update(kw)
        return Trunc(**d)

    def lowered(self, series=0, regular=0, var_min: Mapping[str, int] | None = None) -> "Trunc":
        """Caps reduced by the minimal degrees of a factor the series will be multiplied by."""
        vc = dict(self.var_caps)
        for k, v in (var_min or {}).items():
            if k in vc:
                vc[k] -= v
                if vc[k] < 0:
                    vc[k] = 0
        return Trunc(None if self.series_cap is None else max(self.series_cap - series, 0),
                     self.q_cap,
                     None if self.regular_cap is None else max(self.regular_cap - regular, 0),
                     tuple(vc.items()), self.floors)


def truncate(p: Poly, trunc: Trunc) -> Poly:
    K, G, K2, G2 = p.ring.compile_trunc(trunc)
    d = _filter(p.terms, K, G)
    _check_floor(d, K2, G2)
    return Poly(p.ring, d)


class Series:
    """A polynomial body together with its truncation caps."""

    __slots__ = ("poly", "trunc")

    def __init__(self, poly: Poly, trunc: Trunc, _checked: bool = False):
        if not _checked:
            poly = truncate(poly, trunc)
        self.poly = poly
        self.trunc = trunc

    @property
    def ring(self):
        return self.poly.ring

    def _other(self, other):
        if isinstance(other, Series):
            if other.ring is not self.ring:
                other = Series(other.poly.to_ring(self.ring), other.trunc)
            return other.poly, self.trunc.merge(other.trunc)
        if isinstance(other, Poly):
            return other.to_ring(self.ring), self.trunc
        return self.ring.const(other), self.trunc

    def __add__(self, other):
        p, t = self._other(other)
        return Series(self.poly + p, t)

    __radd__ = __add__

    def __sub__(self, other):
        p, t = self._other(other)
        return Series(self.poly - p, t)

    def __rsub__(self, other):
        p, t = self._other(other)
        return Series(p - self.poly, t)

    def __neg__(self):
        return Series(-self.poly, self.trunc, True)

    def __mul__(self, other):
        p, t = self._other(other)
        return Series(mul_trunc(self.poly, p, t), t, True)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Series(self.poly / other, self.trunc, True)

    def __eq__(self, other):
        if isinstance(other, Series):
            t = self.trunc.merge(other.trunc)
            return truncate(self.poly, t) == truncate(other.poly.to_ring(self.ring), t)
        return self.poly == other

    __hash__ = None

    def is_zero(self):
        return self.poly.is_zero()

    def exp(self):
        return series_exp(self)

    def log(self):
        return series_log(self)

    def inverse(self):
        return series_inverse(self)

    def truncated(self, trunc: Trunc) -> "Series":
        return Series(self.poly, self.trunc.merge(trunc))

    def __repr__(self):
        return f"Series({canonical_serialize(self.poly)!r}, {self.trunc})"


def mul_trunc(a: Poly, b: Poly, trunc: Trunc) -> Poly:
    r = a.ring
    K, G, K2, G2 = r.compile_trunc(trunc)
    d = _clean(_mul_into({}, a.terms, b.terms, r.bias, K, G))
    _check_floor(d, K2, G2)
    return Poly(r, d)


def _graded(p: Poly) -> dict:
    r = p.ring
    sh = _W * r.GRADE
    parts: dict = {}
    for m, c in p.terms.items():
        g = ((m >> sh) & _MASK) - _BIAS
        parts.setdefault(g, {})[m] = c
    return parts


def _as_series(s) -> Series:
    if not isinstance(s, Series):
        raise TypeError("expected a Series")
    return s


def series_exp(s: Series) -> Series:
    """exp of a series without grade-0 part (grade = regular series degree + q-degree)."""
    s = _as_series(s)
    r = s.ring
    parts = _graded(s.poly)
    if any(g <= 0 for g in parts):
        raise ValueError("series_exp: argument has a nonzero constant term")
    K, G, K2, G2 = r.compile_trunc(s.trunc)
    N = r.grade_bound(s.trunc)
    E = [{r.one_mono: mpq(1)}]
    for n in range(1, N + 1):
        acc: dict = {}
        for k in range(1, n + 1):
            Sk = parts.get(k)
            if Sk and E[n - k]:
                _mul_into(acc, Sk, E[n - k], r.bias, K, G, scale=mpq(k))
        inv = mpq(1, n)
        E.append({m: c * inv for m, c in acc.items() if c})
    out: dict = {}
    for part in E:
        out.update(part)
    _check_floor(out, K2, G2)
    return Series(Poly(r, _filter(out, K, G)), s.trunc, True)


def series_log(s: Series) -> Series:
    s = _as_series(s)
    r = s.ring
    parts = _graded(s.poly)
    if any(g < 0 for g in parts):
        raise ValueError("series_log: negative grade")
    if parts.get(0, {}) != {r.one_mono: mpq(1)}:
        raise ValueError("series_log: constant term must equal 1")
    K, G, K2, G2 = r.compile_trunc(s.trunc)
    N = r.grade_bound(s.trunc)
    L: list = [{}]
    for n in range(1, N + 1):
        acc = {m: c * n for m, c in parts.get(n, {}).items()}
        for k in range(1, n):
            Sk = parts.get(n - k)
            if Sk and L[k]:
                _mul_into(acc, L[k], Sk, r.bias, K, G, scale=mpq(-k))
        inv = mpq(1, n)
        L.append({m: c * inv for m, c in acc.items() if c})
    out: dict = {}
    for part in L:
        out.update(part)
    _check_floor(out, K2, G2)
    return Series(Poly(r, _filter(out, K, G)), s.trunc, True)


def series_inverse(s: Series) -> Series:
    s = _as_series(s)
    r = s.ring
    parts = _graded(s.poly)
    if any(g < 0 for g in parts):
        raise ValueError("series_inverse: negative grade")
    c0 = parts.get(0, {})
    if set(c0) != {r.one_mono}:
        raise ValueError("series_inverse: constant term is not a nonzero rational")
    inv0 = 1 / c0[r.one_mono]
    K, G, K2, G2 = r.compile_trunc(s.trunc)
    N = r.grade_bound(s.trunc)
    I = [{r.one_mono: inv0}]
    for n in range(1, N + 1):
        acc: dict = {}
        for k in range(1, n + 1):
            Sk = parts.get(k)
            if Sk and I[n - k]:
                _mul_into(acc, Sk, I[n - k], r.bias, K, G, scale=-inv0)
        I.append(_clean(acc))
    out: dict = {}
    for part in I:
        out.update(part)
    _check_floor(out, K2, G2)
    return Series(Poly(r, _filter(out, K, G)), s.trunc, True)


# ---------------------------------------------------------------------------

class LinearForm:
    """A nonzero-or-zero linear combination of series variables with Q coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[str, object] | Iterable = ()):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc = {}
        for k, v in items:
            acc[k] = acc.get(k, 0) + Q(v)
        self.coeffs = tuple(sorted(((k, v) for k, v in acc.items() if v),
                                   key=lambda kv: natural_key(kv[0])))

    @classmethod
    def parse(cls, text: str) -> "LinearForm":
        p = parse_poly(text)
        out = {}
        for exps, c in p.name_dict().items():
            exps = dict(exps)
            if len(exps) != 1 or list(exps.values())[0] != 1:
                raise ValueError(f"not a homogeneous linear form: {text!r}")
            out[next(iter(exps))] = c
        return cls(out)

    def __iter__(self):
        return iter(self.coeffs)

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        return isinstance(other, LinearForm) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return tuple((natural_key(k), v) for k, v in self.coeffs)

    def __neg__(self):
        return LinearForm({k: -v for k, v in self.coeffs})

    def __add__(self, other):
        return LinearForm(list(self.coeffs) + list(other.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "LinearForm":
        return LinearForm({k: v * Q(c) for k, v in self.coeffs})

    def variables(self):
        return [k for k, _ in self.coeffs]

    def specialize(self, zero=(), rename: Mapping[str, str] | None = None) -> "LinearForm":
        rename = rename or {}
        return LinearForm([(rename.get(k, k), v) for k, v in self.coeffs if k not in zero])

    def to_poly(self, ring: Ring) -> Poly:
        return Poly(ring, _clean({ring.mono_from_names({k: 1}): v for k, v in self.coeffs}))

    def __repr__(self):
        return f"LinearForm({str(self)!r})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        return canonical_serialize(self.to_poly(Ring([k for k, _ in self.coeffs])))


def substitute_linear(f1d: Series, L: LinearForm, ring: Ring, trunc: Trunc) -> Series:
    """Formal composition f1d(L) for a one-variable series f1d."""
    src = f1d.ring
    if len(src.series_idx) != 1:
        raise ValueError("f1d must be a series in exactly one series variable")
    t = src.names[src.series_idx[0]]
    order = f1d.trunc.series_cap
    need = ring.grade_bound(trunc.replace(q_cap=0)) if ring.q_idx is not None else ring.grade_bound(trunc)
    if order is None or need > order:
        raise CapError(f"composition needs terms up to degree {need} but f1d is capped at {order}",
                       suggested=need)
    coeffs = f1d.poly.collect([t])
    Lp = L.to_poly(ring)
    K, G, K2, G2 = ring.compile_trunc(trunc)
    acc: dict = {}
    power = ring.one()
    top = max(k[0] for k in coeffs) if coeffs else 0
    rest = [n for n in src.names if n != t]
    for k in range(0, top + 1):
        if k:
            power = mul_trunc(power, Lp, trunc)
        ck = coeffs.get((k,))
        if ck is None or ck.is_zero():
            continue
        ck = ck.to_ring(ring) if rest else ring.const(ck.constant_term())
        _mul_into(acc, ck.terms, power.terms, ring.bias, K, G)
    d = _clean(acc)
    _check_floor(d, K2, G2)
    return Series(Poly(ring, d), trunc, True)


# ---------------------------------------------------------------------------

def derivative_at_zero(p, orders: Mapping[str, int], zero: Iterable[str] = ()) -> Poly:
    """(prod k_i!) * coefficient of prod v_i^k_i, with those variables (and ``zero``) set to 0."""
    if isinstance(p, Series):
        p = p.poly
    r = p.ring
    idx = [(r.index[n], k) for n, k in orders.items()]
    zidx = [r.index[n] for n in zero if n in r.index]
    scale = mpq(math.prod(math.factorial(k) for k in orders.values()))
    out = {}
    for m, c in p.terms.items():
        if any(r.field(m, i) != k for i, k in idx):
            continue
        if any(r.field(m, i) for i in zidx):
            continue
        mm = m
        for i, k in idx:
            if k:
                mm = _strip(r, mm, i, k)
        out[mm] = c * scale
    return Poly(r, out)


def solve_linear_symbol(rel: Poly, sym: str):
    """Write rel = c*sym + r with c a nonzero rational; returns (c, r)."""
    r = rel.ring
    if sym not in r.index:
        raise ZeroCoefficientError(f"{sym} does not occur")
    deg = rel.degree(sym)
    if deg <= 0:
        raise ZeroCoefficientError(f"coefficient of {sym} is zero")
    if deg > 1 or rel.min_degree(sym) < 0:
        raise NonlinearError(f"relation is not linear in {sym}")
    c = rel.coeff_of(sym, 1)
    if not c.is_constant():
        raise NonConstantCoefficientError(f"coefficient of {sym} is not constant: {c}")
    rest = rel.coeff_of(sym, 0)
    return c.constant_term(), rest


class SubstitutionTable:
    """Ordered substitutions symbol -> polynomial."""

    def __init__(self, entries: Iterable = ()):
        self.entries: list = []
        for name, poly in entries:
            self.add(name, poly)

    def add(self, name: str, poly: Poly):
        if name in self:
            raise ValueError(f"{name} already solved")
        self.entries.append((name, poly))

    def __contains__(self, name):
        return any(n == name for n, _ in self.entries)

    def __getitem__(self, name):
        for n, p in self.entries:
            if n == name:
                return p
        raise KeyError(name)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def names(self):
        return [n for n, _ in self.entries]

    def mapping(self):
        return dict(self.entries)

    def check_acyclic(self):
        deps = {n: p.free_symbols() & set(self.names()) for n, p in self.entries}
        state: dict = {}

        def visit(n, stack):
            if state.get(n) == 1:
                raise CycleError(f"substitution cycle through {' -> '.join(stack + [n])}")
            if state.get(n) == 2:
                return
            state[n] = 1
            for d in sorted(deps[n]):
                visit(d, stack + [n])
            state[n] = 2

        for n in deps:
            visit(n, [])

    def apply(self, p: Poly) -> Poly:
        return apply_substitutions(p, self)

    def resolved(self) -> "SubstitutionTable":
        return SubstitutionTable((n, apply_substitutions(p, self)) for n, p in self.entries)

    def to_ring(self, ring: Ring) -> "SubstitutionTable":
        return SubstitutionTable((n, p.to_ring(ring)) for n, p in self.entries)


def apply_substitutions(p: Poly, table: SubstitutionTable) -> Poly:
    table.check_acyclic()
    names = set(table.names())
    for _ in range(len(table) + 1):
        present = p.free_symbols() & names
        if not present:
            return p
        p = p.subs({n: q.to_ring(p.ring) for n, q in table.entries if n in present})
    raise CycleError("substitution did not reach a fixed point")


# ---------------------------------------------------------------------------
# canonical text format
#
#   poly    := "0" | term (sep term)*          sep := " + " | " - "
#   term    := ["-"] (coeff | coeff "*" mono | mono)
#   coeff   := INT | INT "/" INT               (lowest terms, denominator > 1)
#   mono    := factor ("*" factor)*            factors sorted by natural name order
#   factor  := NAME | NAME "^" ["-"] INT
#
# Terms appear in graded-lexicographic order: descending total degree, ties by
# descending exponent vector over the naturally sorted symbols.

def _fmt_rat(c: mpq) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def canonical_serialize(p: Poly) -> str:
    if isinstance(p, Series):
        p = p.poly
    if not p.terms:
        return "0"
    r = p.ring
    order = sorted(range(r.nvars), key=lambda i: natural_key(r.names[i]))
    rows = []
    for m, c in p.terms.items():
        exps = r.unpack(m)
        vec = tuple(exps[i] for i in order)
        rows.append((sum(vec), vec, c))
    rows.sort(key=lambda t: (t[0], t[1]), reverse=True)
    out = []
    for k, (_, vec, c) in enumerate(rows):
        factors = []
        for i, e in zip(order, vec):
            if e == 1:
                factors.append(r.names[i])
            elif e:
                factors.append(f"{r.names[i]}^{e}")
        neg = c < 0
        a = -c if neg else c
        if not factors:
            body = _fmt_rat(a)
        elif a == 1:
            body = "*".join(factors)
        else:
            body = _fmt_rat(a) + "*" + "*".join(factors)
        if k == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


_tok = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text):
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _tok.match(text, pos)
        if not m or m.end() == pos:
            break
        pos = m.end()
        if m.group(1):
            toks.append(("num", int(m.group(1))))
        elif m.group(2):
            toks.append(("name", m.group(2)))
        elif m.group(3) and not m.group(3).isspace():
            toks.append(("op", m.group(3)))
    return toks


class _Parser:
    # expression trees are kept as name-keyed dicts so the ring is decided at the end
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0
        self.text = text

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg):
        raise ValueError(f"parse error in {self.text!r}: {msg}")

    def parse(self):
        v = self.expr()
        if self.i != len(self.toks):
            self.error(f"unexpected token {self.peek()[1]!r}")
        return v

    def expr(self):
        kind, val = self.peek()
        sign = 1
        if (kind, val) == ("op", "-"):
            self.take()
            sign = -1
        elif (kind, val) == ("op", "+"):
            self.take()
        acc = _dscale(self.term(), sign)
        while True:
            kind, val = self.peek()
            if (kind, val) == ("op", "+"):
                self.take()
                acc = _dadd(acc, self.term())
            elif (kind, val) == ("op", "-"):
                self.take()
                acc = _dadd(acc, _dscale(self.term(), -1))
            else:
                return acc

    def term(self):
        acc = self.factor()
        while True:
            kind, val = self.peek()
            if (kind, val) == ("op", "*"):
                self.take()
                acc = _dmul(acc, self.factor())
            elif (kind, val) == ("op", "/"):
                self.take()
                d = self.factor()
                if set(d) != {frozenset()}:
                    self.error("division by a non-constant")
                acc = _dscale(acc, 1 / d[frozenset()])
            else:
                return acc

    def factor(self):
        kind, val = self.peek()
        if (kind, val) == ("op", "-"):
            self.take()
            return _dscale(self.factor(), -1)
        base = self.atom()
        kind, val = self.peek()
        if (kind, val) == ("op", "^"):
            self.take()
            sign = 1
            if self.peek() == ("op", "-"):
                self.take()
                sign = -1
            k, e = self.take()
            if k != "num":
                self.error("exponent must be an integer")
            e *= sign
            if len(base) == 1:
                (mono, c), = base.items()
                if e < 0 and c != 1:
                    self.error("negative power of a non-monomial")
                return {frozenset((n, x * e) for n, x in mono): c ** e if e >= 0 else c}
            if e < 0:
                self.error("negative power of a non-monomial")
            out = {frozenset(): mpq(1)}
            for _ in range(e):
                out = _dmul(out, base)
            return out
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return {frozenset(): mpq(val)}
        if kind == "name":
            return {frozenset({(val, 1)}): mpq(1)}
        if (kind, val) == ("op", "("):
            v = self.expr()
            if self.take() != ("op", ")"):
                self.error("missing ')'")
            return v
        self.error(f"unexpected token {val!r}")


def _dadd(a, b):
    out = dict(a)
    for k, v in b.items():
        s = out.get(k, 0) + v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def _dscale(a, c):
    c = Q(c)
    return {k: v * c for k, v in a.items() if v * c}


def _dmul(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            d = dict(ka)
            for n, e in kb:
                d[n] = d.get(n, 0) + e
            k = frozenset((n, e) for n, e in d.items() if e)
            s = out.get(k, 0) + va * vb
            if s:
                out[k] = s
            else:
                out.pop(k, None)
    return out


def parse_poly(text: str, ring: Ring | None = None) -> Poly:
    """Parse the canonical grammar (parentheses and products also accepted).

    Without a ring, every symbol becomes a parameter of a fresh ring.
    """
    d = _Parser(text).parse()
    if ring is None:
        names = sorted({n for k in d for n, _ in k}, key=natural_key)
        ring = Ring(params=names)
    out = {}
    for k, c in d.items():
        for n, _ in k:
            if n not in ring.index:
                raise ValueError(f"unknown symbol {n!r} for ring {ring}")
        m = ring.mono_from_names(dict(k))
        out[m] = out.get(m, 0) + c
    return Poly(ring, _clean(out))
