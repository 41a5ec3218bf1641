"""Operator columns, modulus decomposition, finite truncations.

Columns of T over the f-basis are built two independent ways: an oracle
that literally applies "shift e_i to e_{i+1}" through the change of basis,
and a closed-form path that emits the per-clause column formulas directly
(interior columns are single subdiagonal entries; endpoint columns expand
the target e-vector through the explicit inversion identities).  Their
exact agreement is the central correctness check of the package.

The matrix is lower Hessenberg with strictly positive subdiagonal; the
only negative entries come from the A- and C-clause endpoint columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import (
    BasisExpander,
    Clause,
    classify,
    expander_for,
    lambda_row,
    surd_power,
)
from .growth import GrowthSequence
from .scalars import (
    Comparison,
    ExactScalar,
    ExactSum,
    ONE,
    evaluate_float,
    integer_power,
    scalar_from_json,
    scalar_to_json,
    sign_of,
)

__all__ = [
    "DegenerateStructure",
    "SparseColumn",
    "TNegRow",
    "TruncatedOperator",
    "UndecidableSign",
    "export_matrix_csv",
    "import_matrix_csv",
    "modulus_split",
    "t_column_closed",
    "t_column_oracle",
    "tneg_rows_closed",
    "truncate",
]


class UndecidableSign(RuntimeError):
    def __init__(self, row: int, col: int):
        super().__init__(f"sign of entry ({row}, {col}) undecidable at max precision")
        self.row, self.col = row, col


class DegenerateStructure(ValueError):
    """A closed-form row formula's implicit interval premise fails for this d."""


@dataclass
class SparseColumn:
    """Column i of T: finitely many rows k with Tf_i having component at f_k."""

    index: int
    entries: dict[int, ExactSum] = field(default_factory=dict)

    def add(self, row: int, value: ExactScalar) -> None:
        merged = self.entries.get(row, ExactSum()).add(ExactSum.of(value))
        if merged.is_zero():
            self.entries.pop(row, None)
        else:
            self.entries[row] = merged

    def rows(self) -> list[int]:
        return sorted(self.entries)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SparseColumn)
                and self.index == other.index and self.entries == other.entries)


# ---------------------------------------------------------------------------
# oracle path: shift through the change of basis
# ---------------------------------------------------------------------------


def t_column_oracle(i: int, d: GrowthSequence,
                    expander: BasisExpander | None = None) -> SparseColumn:
    """Column of Tf_i from the definition: apply e_j -> e_{j+1} to the row of f_i.

    Requires i + 1 <= v_L so the shifted vector is classifiable.
    """
    if i + 1 > d.v(d.levels):
        raise IndexError(f"column {i} needs e_{i + 1}, beyond v_L = {d.v(d.levels)}")
    expander = expander or expander_for(d)
    row = lambda_row(i, d)
    col = SparseColumn(i)
    parts = [(row.diag, i)]
    if row.partner is not None:
        parts.append((row.partner[1], row.partner[0]))
    for coeff, src in parts:
        for k, mu in expander.e_in_f(src + 1).coeffs:
            col.add(k, coeff.mul(mu))
    return col


# ---------------------------------------------------------------------------
# closed-form path: per-clause case analysis
# ---------------------------------------------------------------------------


def _expand_e_closed(j: int, d: GrowthSequence) -> list[tuple[int, ExactScalar]]:
    """e_j over the f-basis from the displayed inversion identities.

    Handles the index shapes the endpoint analysis can produce: clause-B/D
    indices (single positive term), clause-A interval starts (the two-term
    identity through f_0), and clause-C indices (finite chain stepping down
    by b_n until it exits the clause).  Anything else is a derivation bug.
    """
    if j == 0:
        return [(0, ONE)]
    out: list[tuple[int, ExactScalar]] = []
    carry = ONE
    cur = j
    while True:
        cls = classify(cur, d)
        n = cls.n
        if cls.tag is Clause.ZERO:
            out.append((0, carry))
            return out
        if cls.tag in (Clause.B, Clause.D):
            radicand = d.a_at(n) if cls.tag is Clause.B else d.b_at(n)
            coeff = integer_power(n, -cur).mul(surd_power(d, radicand, cur - cls.h))
            out.append((cur, carry.mul(coeff)))
            return out
        if cls.tag is Clause.A:
            if cur != cls.r * d.a_at(n):
                raise DegenerateStructure(
                    f"e_{cur} hits clause A off its interval start; unexpected shape")
            scale = integer_power(n, -cur)
            out.append((cur, carry.mul(scale).mul(
                ExactScalar.from_integer(d.a_at(n - cls.r)).inverse())))
            out.append((0, carry.mul(scale)))
            return out
        # clause C: e_cur = n^-cur f_cur + b_n n^-b_n e_{cur - b_n}
        b_n = d.b_at(n)
        out.append((cur, carry.mul(integer_power(n, -cur))))
        carry = carry.mul(ExactScalar.from_integer(b_n)).mul(integer_power(n, -b_n))
        cur -= b_n


def t_column_closed(i: int, d: GrowthSequence) -> SparseColumn:
    """Column of Tf_i assembled from the endpoint/interior case formulas."""
    if i + 1 > d.v(d.levels):
        raise IndexError(f"column {i} needs e_{i + 1}, beyond v_L = {d.v(d.levels)}")
    cls = classify(i, d)
    n, r = cls.n, cls.r
    col = SparseColumn(i)

    if cls.tag is Clause.ZERO:
        # Tf_0 = e_1 = 2^((1 - a_1/2)/sqrt(a_1)) f_1
        a1 = d.a_at(1)
        col.add(1, surd_power(d, a1, Fraction(1) - Fraction(a1, 2)))
        return col

    a_n = d.a_at(n)
    if cls.tag is Clause.A:
        m = n - r
        if i < r * a_n + d.v(m):
            col.add(i + 1, integer_power(n - r, -1))
            return col
        # endpoint i = r a_n + v_m
        c_shared = ExactScalar.from_integer(d.a_at(m)).mul(integer_power(n - r, d.v(m)))
        c_pos = c_shared.mul(integer_power(n, r * a_n))
        for k, coeff in _expand_e_closed(i + 1, d):
            col.add(k, c_pos.mul(coeff))
        for k, coeff in _expand_e_closed(1 + d.v(m), d):
            col.add(k, c_shared.mul(coeff).negate())
        return col

    if cls.tag is Clause.B:
        if i + 1 < (r + 1) * a_n:
            col.add(i + 1, integer_power(n, -1).mul(surd_power(d, a_n, Fraction(1))))
            return col
        # endpoint i = (r+1) a_n - 1: lands on the A-start above
        c = integer_power(n, i).mul(surd_power(d, a_n, Fraction(1) - Fraction(a_n, 2)))
        for k, coeff in _expand_e_closed((r + 1) * a_n, d):
            col.add(k, c.mul(coeff))
        return col

    b_n = d.b_at(n)
    if cls.tag is Clause.C:
        if i < n * a_n + r * b_n:
            col.add(i + 1, integer_power(n, -1))
            return col
        # endpoint i = n a_n + r b_n
        c_pos = integer_power(n, i)
        for k, coeff in _expand_e_closed(i + 1, d):
            col.add(k, c_pos.mul(coeff))
        c_neg = ExactScalar.from_integer(b_n).mul(integer_power(n, i - b_n))
        for k, coeff in _expand_e_closed(i + 1 - b_n, d):
            col.add(k, c_neg.mul(coeff).negate())
        return col

    # clause D
    if i + 1 < (r + 1) * (a_n + b_n):
        col.add(i + 1, integer_power(n, -1).mul(surd_power(d, b_n, Fraction(1))))
        return col
    # endpoint i = (r+1)(a_n + b_n) - 1
    c = integer_power(n, i).mul(
        surd_power(d, b_n, Fraction(1) - (r + 1) * a_n - Fraction(b_n, 2)))
    for k, coeff in _expand_e_closed((r + 1) * (a_n + b_n), d):
        col.add(k, c.mul(coeff))
    return col


# ---------------------------------------------------------------------------
# modulus decomposition
# ---------------------------------------------------------------------------


def modulus_split(col: SparseColumn) -> tuple[SparseColumn, SparseColumn, SparseColumn]:
    """Entrywise (positive part, negative part, modulus); parts are nonnegative.

    Single-term entries decide their sign structurally; genuine sums fall
    back to certified comparison against zero and refuse to guess.
    """
    pos, neg, mod = SparseColumn(col.index), SparseColumn(col.index), SparseColumn(col.index)
    for row, entry in col.entries.items():
        s = sign_of(entry)
        if s is Comparison.UNKNOWN:
            raise UndecidableSign(row, col.index)
        if s is Comparison.GREATER:
            pos.entries[row] = entry
            mod.entries[row] = entry
        else:
            neg.entries[row] = entry.negate()
            mod.entries[row] = entry.negate()
    return pos, neg, mod


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------


@dataclass
class TruncatedOperator:
    """P_N T P_N with the entrywise split, all entries exact.

    Columns whose untruncated image had entries beyond row N are flagged;
    at a block boundary N = v_L the final column's above-boundary entry is
    the single subdiagonal continuation, provided the (unmaterialized) next
    level keeps growing, and it is dropped under that stated convention.
    """

    d: GrowthSequence
    dim: int  # N + 1
    columns: list[SparseColumn]
    plus: list[SparseColumn]
    minus: list[SparseColumn]
    modulus: list[SparseColumn]
    flags: dict[int, list[int]]  # column -> dropped rows

    @property
    def n_trunc(self) -> int:
        return self.dim - 1

    def entry(self, row: int, col: int) -> ExactSum:
        return self.columns[col].entries.get(row, ExactSum())

    def part(self, which: str) -> list[SparseColumn]:
        try:
            return {"T": self.columns, "plus": self.plus,
                    "minus": self.minus, "modulus": self.modulus}[which]
        except KeyError:
            raise ValueError(f"unknown part {which!r}") from None

    def to_dense(self, which: str = "T", precision: int = 128) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for col in self.part(which):
            for row, entry in col.entries.items():
                out[row, col.index] = evaluate_float(entry, precision)
        return out


def _structure_check(col: SparseColumn, n_trunc: int) -> None:
    for row in col.entries:
        if row > col.index + 1:
            raise AssertionError(
                f"entry ({row}, {col.index}) below the subdiagonal; construction bug")
    if col.index < n_trunc:
        sub = col.entries.get(col.index + 1)
        if sub is None or sign_of(sub) is not Comparison.GREATER:
            raise AssertionError(f"subdiagonal entry ({col.index + 1}, {col.index}) not positive")


def truncate(d: GrowthSequence, n_trunc: int,
             expander: BasisExpander | None = None) -> TruncatedOperator:
    """Compress T to indices 0..n_trunc; requires n_trunc <= v_L.

    Block-aligned sizes n_trunc = v_m minimize the artifact: there the only
    dropped entry is the subdiagonal continuation out of the final column.
    """
    v_last = d.v(d.levels)
    if not 1 <= n_trunc <= v_last:
        raise IndexError(f"truncation size must be in [1, v_L = {v_last}]")
    expander = expander or expander_for(d)
    columns, plus, minus, modulus = [], [], [], []
    flags: dict[int, list[int]] = {}
    for i in range(n_trunc + 1):
        if i == v_last:
            # final constructible column: the shift target e_{v_L + 1} sits
            # beyond the last materialized level and is dropped (flagged)
            row = lambda_row(i, d)
            col = SparseColumn(i)
            j, off = row.partner  # C(L, L) always has a partner
            for k, mu in expander.e_in_f(j + 1).coeffs:
                col.add(k, off.mul(mu))
            dropped = [i + 1]
        else:
            full = t_column_oracle(i, d, expander)
            col = SparseColumn(i)
            dropped = []
            for k in full.rows():
                if k > n_trunc:
                    dropped.append(k)
                else:
                    col.entries[k] = full.entries[k]
        if dropped:
            flags[i] = dropped
        _structure_check(col, n_trunc)
        p, m, a = modulus_split(col)
        columns.append(col)
        plus.append(p)
        minus.append(m)
        modulus.append(a)
    return TruncatedOperator(d, n_trunc + 1, columns, plus, minus, modulus, flags)


# ---------------------------------------------------------------------------
# symbolic negative-part rows
# ---------------------------------------------------------------------------


@dataclass
class TNegRow:
    row: int
    family: str  # "A" or "C"
    level: int   # m for the A family, n for the C family
    sup_norm: ExactScalar
    entries: list[tuple[int, ExactScalar]]  # (column, value)


def a_family_value(d: GrowthSequence, m: int) -> ExactScalar:
    """Negative-part entry in row 1 + v_m; independent of which (n, r) hits it."""
    a_next = d.a_at(m + 1)
    return (integer_power(m + 1, -(1 + d.v(m)))
            .mul(surd_power(d, a_next, Fraction(1 + d.v(m)) - Fraction(a_next, 2)))
            .mul(ExactScalar.from_integer(d.a_at(m)))
            .mul(integer_power(m, d.v(m))))


def c_family_value(d: GrowthSequence, n: int) -> ExactScalar:
    """Negative-part entry in rows n a_n + (r-1) b_n + 1; independent of r."""
    a_n, b_n = d.a_at(n), d.b_at(n)
    return (ExactScalar.from_integer(b_n)
            .mul(integer_power(n, -1))
            .mul(surd_power(d, b_n, Fraction(1 + n * a_n) - Fraction(b_n, 2))))


def _require_nondegenerate(d: GrowthSequence, n_max: int) -> None:
    for m in range(1, n_max):
        if d.a_at(m + 1) < d.v(m) + 2:
            raise DegenerateStructure(
                f"a_{m + 1} = {d.a_at(m + 1)} <= v_{m} + 1: row 1+v_{m} spreads beyond "
                "the closed formula; build a truncation instead")
    for n in range(1, n_max + 1):
        if d.b_at(n) < (n - 1) * d.a_at(n) + 2:
            raise DegenerateStructure(
                f"b_{n} = {d.b_at(n)} <= (n-1)a_n + 1: level-{n} C-endpoint columns "
                "spread beyond the closed formula; build a truncation instead")


def tneg_rows_closed(d: GrowthSequence, n_max: int | None = None) -> dict[int, TNegRow]:
    """Every nonzero row of the negative part with levels <= n_max, symbolically.

    Row 1 + v_m collects one identical entry from each pair (n, r) with
    n - r = m; rows n a_n + (r-1) b_n + 1 hold one C-family entry each.
    Valid when the clause intervals around each target row are nonempty,
    which every rapidity-passing sequence satisfies; degenerate hand-built
    sequences are refused rather than given wrong rows.
    """
    n_max = d.levels if n_max is None else n_max
    if not 1 <= n_max <= d.levels:
        raise ValueError(f"n_max must be in [1, {d.levels}]")
    _require_nondegenerate(d, n_max)
    rows: dict[int, TNegRow] = {}
    for m in range(0, n_max):
        value = a_family_value(d, m)
        cols = [(d.v(m) + r * d.a_at(m + r), value)
                for r in range(1, n_max - m + 1)]
        rows[1 + d.v(m)] = TNegRow(1 + d.v(m), "A", m, value, cols)
    for n in range(1, n_max + 1):
        value = c_family_value(d, n)
        for r in range(1, n + 1):
            row = n * d.a_at(n) + (r - 1) * d.b_at(n) + 1
            rows[row] = TNegRow(row, "C", n, value,
                                [(n * d.a_at(n) + r * d.b_at(n), value)])
    return rows


def tminus_support_check(trunc: TruncatedOperator) -> dict:
    """Audit the negative part of a truncation against the two entry families.

    Every A-endpoint column contributes at row 1 + v_{n-r} and every
    C-endpoint column at row n a_n + (r-1) b_n + 1; where the family
    formula's interval premise holds the value must match it exactly.  A
    sequence too slow for the premise spreads those endpoint columns
    further (extra rows, possibly row 0); such columns are enumerated and
    any negative entry outside them is a failure.
    """
    d, n_cap = trunc.d, trunc.n_trunc
    family_positions: dict[tuple[int, int], ExactScalar | None] = {}
    spread_columns: dict[int, list[int]] = {}
    for n in range(1, d.levels + 1):
        a_n, b_n = d.a_at(n), d.b_at(n)
        for r in range(1, n + 1):
            m = n - r
            col = d.v(m) + r * a_n
            if col <= n_cap:
                generic = m == 0 or d.a_at(m + 1) >= d.v(m) + 2
                family_positions[(1 + d.v(m), col)] = a_family_value(d, m) if generic else None
                if not generic:
                    spread_columns[col] = [0]
            col = n * a_n + r * b_n
            if col <= n_cap:
                generic = r >= 2 or b_n >= (n - 1) * a_n + 2
                row = n * a_n + (r - 1) * b_n + 1
                family_positions[(row, col)] = c_family_value(d, n) if generic else None
                if not generic:
                    spread_columns[col] = [a_n, 0]

    column0_empty = not trunc.minus[0].entries
    value_mismatches = []
    missing = []
    extras = []
    support = {}
    for col in trunc.minus:
        for row, entry in col.entries.items():
            support[(row, col.index)] = entry
    for (row, colidx), want in family_positions.items():
        got = support.pop((row, colidx), None)
        if got is None:
            missing.append((row, colidx))
        elif want is not None and got != ExactSum.of(want):
            value_mismatches.append((row, colidx))
    for (row, colidx) in support:
        if row not in spread_columns.get(colidx, []):
            extras.append((row, colidx))
    return {
        "ok": column0_empty and not value_mismatches and not missing and not extras,
        "column0_empty": column0_empty,
        "family_positions": len(family_positions),
        "missing": sorted(missing),
        "value_mismatches": sorted(value_mismatches),
        "unexplained_support": sorted(extras),
        "degenerate_spread_columns": sorted(spread_columns),
    }


# ---------------------------------------------------------------------------
# coordinate export
# ---------------------------------------------------------------------------


def export_matrix_csv(trunc: TruncatedOperator, path, which: str = "T") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "sign", "approx_decimal", "exact_json"])
        for col in trunc.part(which):
            for row in sorted(col.entries):
                entry = col.entries[row]
                s = sign_of(entry)
                sgn = {Comparison.GREATER: 1, Comparison.LESS: -1}.get(s, 0)
                writer.writerow([
                    row, col.index, sgn,
                    repr(evaluate_float(entry)),
                    json.dumps([scalar_to_json(t) for t in entry.terms]),
                ])


def import_matrix_csv(path) -> dict[tuple[int, int], ExactSum]:
    out: dict[tuple[int, int], ExactSum] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            terms = [scalar_from_json(doc) for doc in json.loads(rec["exact_json"])]
            out[(int(rec["row"]), int(rec["col"]))] = ExactSum.of(*terms)
    return out
