"""Coefficient recursions: d_j tables, leading coefficients, triangular and joint solves."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..ring import (
    NonConstantCoefficientError, NonlinearError, Poly, SolveError, SubstitutionTable,
    ZeroCoefficientError, canonical_serialize, solve_linear_symbol,
)


class RecursionSolveError(SolveError):
    def __init__(self, msg, j=None):
        super().__init__(msg)
        self.j = j


def family_index(name: str, prefix: str):
    m = re.fullmatch(re.escape(prefix) + r"(\d+)", name)
    return int(m.group(1)) if m else None


def family_symbols(p: Poly, prefix: str) -> list:
    """Family members occurring in p, highest index first."""
    out = [(family_index(n, prefix), n) for n in p.free_symbols()]
    return [n for i, n in sorted((t for t in out if t[0] is not None), reverse=True)]


def d_table(dr, j_range) -> list:
    """[(j, d_j)] from a {j: Poly} mapping or a univariate Series."""
    if isinstance(dr, dict):
        return [(j, dr[j]) for j in j_range if j in dr]
    poly = dr.poly
    var = [poly.ring.names[i] for i in poly.ring.series_idx][0]
    return [(j, poly.coeff_of(var, j)) for j in j_range]


def top_unknown(p: Poly, prefix: str, exclude=()):
    for n in family_symbols(p, prefix):
        if n not in exclude:
            return n
    return None


def leading_scan(table, prefix: str, exclude=()) -> list:
    """[(j, coefficient of the highest unknown in d_j)] for nonzero d_j."""
    out = []
    for j, d in table:
        if d.is_zero():
            continue
        sym = top_unknown(d, prefix, exclude)
        if sym is None:
            continue
        c, _ = solve_linear_symbol(d, sym)
        out.append((j, sym, c))
    return out


def blowup_leading(j: int) -> int:
    return 2 * (j - 4) * (j + 1) * (j + 2) * (j + 3)


def grassmann3_leading(j: int) -> int:
    return -240 * (j - 6) * (j - 5) * (j - 2) * (j + 1) * (j + 2)


def second_differences(seq) -> list:
    d1 = [b - a for a, b in zip(seq, seq[1:])]
    return [b - a for a, b in zip(d1, d1[1:])]


@dataclass
class RecursionReport:
    d_table: list
    leading_coeffs: list
    closed_form_match: bool
    solution: SubstitutionTable
    table_match: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def solve_recursion(table, prefix: str, free=()) -> tuple:
    """Triangular solve ascending in j: each d_j determines its highest unknown.

    Returns (SubstitutionTable, residuals) where residuals are reduced
    relations involving only free symbols (nonempty means inconsistency).
    """
    sol = SubstitutionTable()
    residuals = []
    free = set(free)
    for j, d in sorted(table, key=lambda t: t[0]):
        rel = sol.apply(d)
        if rel.is_zero():
            continue
        sym = top_unknown(rel, prefix, free | set(sol.names()))
        if sym is None:
            residuals.append((j, rel))
            continue
        try:
            c, rest = solve_linear_symbol(rel, sym)
        except ZeroCoefficientError as e:
            raise RecursionSolveError(f"d_{j}: zero leading coefficient for {sym}", j) from e
        except NonConstantCoefficientError as e:
            raise RecursionSolveError(f"d_{j}: non-constant leading coefficient for {sym}", j) from e
        except NonlinearError as e:
            raise RecursionSolveError(f"d_{j}: nonlinear in {sym}", j) from e
        value = -rest / c
        bad = {n for n in value.free_symbols() if family_index(n, prefix) is not None} - free
        if bad:
            raise RecursionSolveError(f"d_{j}: {sym} depends on unsolved {sorted(bad)}", j)
        sol.add(sym, value)
    return sol, residuals


def compare_tables(solution: SubstitutionTable, expected: dict) -> list:
    """[(symbol, matched)] for every expected symbol."""
    out = []
    for name, poly in expected.items():
        if name not in solution:
            out.append((name, False))
            continue
        got = solution[name]
        out.append((name, got == poly))
    return out


# ---------------------------------------------------------------------------

@dataclass
class JointResult:
    solution: SubstitutionTable
    free: list
    residuals: list
    success: bool
    steps: list = field(default_factory=list)


def joint_solve(tables, prefix: str = "b", target_free=("b2", "b3", "b4")) -> JointResult:
    """Iterative elimination over several relation tables.

    Repeatedly substitutes the current solutions, picks the first relation
    (tables in order, j ascending) that is linear in some unknown with a
    nonzero rational coefficient (highest index tried first), solves it and
    propagates.  Never divides by a non-constant coefficient; when no such
    relation is left, the reduced relations are returned as residuals.
    """
    target = set(target_free)
    relations = []
    for tag, table in tables:
        for j, d in table:
            relations.append((tag, j, d))
    sol = SubstitutionTable()
    steps = []
    while True:
        reduced = []
        for tag, j, d in relations:
            r = sol.apply(d)
            if not r.is_zero():
                reduced.append((tag, j, r))
        pick = None
        for tag, j, r in reduced:
            for sym in family_symbols(r, prefix):
                if sym in target:
                    continue
                try:
                    c, rest = solve_linear_symbol(r, sym)
                except SolveError:
                    continue
                pick = (tag, j, sym, -rest / c)
                break
            if pick:
                break
        if pick is None:
            break
        tag, j, sym, value = pick
        steps.append((tag, j, sym))
        new = SubstitutionTable()
        one = SubstitutionTable([(sym, value)])
        for n in sol.names():
            new.add(n, one.apply(sol[n]))
        new.add(sym, value)
        sol = new
    symbols = set()
    for _, _, d in relations:
        symbols |= {n for n in d.free_symbols() if family_index(n, prefix) is not None}
    free = sorted(symbols - set(sol.names()), key=lambda n: family_index(n, prefix))
    residuals = [(tag, j, r) for tag, j, r in reduced]
    success = set(free) == target and not residuals
    return JointResult(sol, free, residuals, success, steps)


def serialize_table(table: SubstitutionTable) -> list:
    return [(n, canonical_serialize(table[n])) for n in table.names()]
