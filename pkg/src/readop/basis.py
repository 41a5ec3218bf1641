"""Clause classification and the exact change of basis.

Each coordinate index i falls into exactly one of five clauses (0/A/B/C/D)
determined by the growth sequence; the clause defines f_i as a one- or
two-term combination of the auxiliary basis (e_i).  The relation is lower
triangular with positive diagonal, so it inverts along finite partner
chains, which is what e_in_f materializes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .growth import GrowthSequence
from .scalars import (
    ExactScalar,
    ExactSum,
    ONE,
    evaluate_float,
    integer_power,
    squarefree_split,
)

__all__ = [
    "AmbiguousIndex",
    "BasisExpander",
    "ChainExpansion",
    "Clause",
    "IndexClass",
    "LambdaRow",
    "UncoveredIndex",
    "allowed_surd_keys",
    "classify",
    "clause_intervals",
    "dump_basis_csv",
    "expander_for",
    "f_in_e_roundtrip",
    "lambda_row",
    "surd_power",
]


class Clause(Enum):
    ZERO = "0"
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class UncoveredIndex(ValueError):
    def __init__(self, i: int):
        super().__init__(f"index {i} is covered by no clause; sequence is structurally invalid")
        self.index = i


class AmbiguousIndex(ValueError):
    def __init__(self, i: int, matches):
        super().__init__(f"index {i} matched {len(matches)} clauses: {matches}")
        self.index = i
        self.matches = matches


@dataclass(frozen=True)
class IndexClass:
    tag: Clause
    n: int
    r: int | None = None
    h: Fraction | None = None


@dataclass(frozen=True)
class LambdaRow:
    """f_i = diag*e_i (+ off*e_partner); diag is always nonzero."""

    index: int
    diag: ExactScalar
    partner: tuple[int, ExactScalar] | None = None


@dataclass(frozen=True)
class ChainExpansion:
    """e_i = sum of coeff*f_j along a strictly decreasing chain of indices."""

    index: int
    coeffs: tuple[tuple[int, ExactScalar], ...]  # sorted by j descending

    def as_dict(self) -> dict[int, ExactScalar]:
        return dict(self.coeffs)


def clause_intervals(d: GrowthSequence, n: int):
    """Inclusive integer ranges [(clause, r, lo, hi)] for level n; may be empty."""
    a_n, b_n = d.a_at(n), d.b_at(n)
    out = []
    out.append((Clause.B, 0, d.v(n - 1) + 1, a_n - 1))
    for r in range(1, n + 1):
        out.append((Clause.A, r, r * a_n, r * a_n + d.v(n - r)))
        if r < n:
            out.append((Clause.B, r, r * a_n + d.v(n - r) + 1, (r + 1) * a_n - 1))
    for r in range(0, n):
        out.append((Clause.D, r, n * a_n + r * b_n + 1, (r + 1) * (a_n + b_n) - 1))
    for r in range(1, n + 1):
        out.append((Clause.C, r, r * (a_n + b_n), n * a_n + r * b_n))
    return out


def classify(i: int, d: GrowthSequence) -> IndexClass:
    """Resolve the unique clause for index i (0 <= i <= v_L).

    The level n is found from the block boundaries; membership is then
    tested against every clause interval of that level so that an invalid
    sequence surfaces as UncoveredIndex or AmbiguousIndex instead of a
    silently wrong class.
    """
    if i < 0:
        raise IndexError("negative index")
    if i == 0:
        return IndexClass(Clause.ZERO, 0)
    n = d.level_of(i)
    a_n, b_n = d.a_at(n), d.b_at(n)
    matches = []
    for tag, r, lo, hi in clause_intervals(d, n):
        if lo <= i <= hi:
            matches.append((tag, r))
    if not matches:
        raise UncoveredIndex(i)
    if len(matches) > 1:
        raise AmbiguousIndex(i, matches)
    tag, r = matches[0]
    if tag is Clause.B:
        return IndexClass(tag, n, r, Fraction(2 * r + 1, 2) * a_n)
    if tag is Clause.D:
        return IndexClass(tag, n, r, Fraction(2 * r + 1, 2) * b_n)
    return IndexClass(tag, n, r)


def allowed_surd_keys(d: GrowthSequence) -> frozenset[int]:
    """Squarefree parts of every a_n and b_n: the only legal surd radicands."""
    keys = set()
    for x in d.a + d.b:
        _, core = squarefree_split(x)
        if core > 1:
            keys.add(core)
    return frozenset(keys)


def surd_power(d: GrowthSequence, radicand: int, coeff: Fraction) -> ExactScalar:
    """2**(coeff/sqrt(radicand)) with the closure invariant enforced."""
    if radicand not in set(d.a + d.b):
        raise ValueError(f"surd radicand {radicand} is not an a_n or b_n of this sequence")
    return ExactScalar.pow2(0, {radicand: coeff})


def lambda_row(i: int, d: GrowthSequence) -> LambdaRow:
    cls = classify(i, d)
    n, r = cls.n, cls.r
    if cls.tag is Clause.ZERO:
        return LambdaRow(0, ONE)
    a_n = d.a_at(n)
    if cls.tag is Clause.A:
        # f_i = (n^{r a_n} e_i - e_{i - r a_n}) * (n-r)^{i - r a_n} * a_{n-r}
        outer = integer_power(n - r, i - r * a_n).mul(
            ExactScalar.from_integer(d.a_at(n - r)))
        diag = integer_power(n, r * a_n).mul(outer)
        return LambdaRow(i, diag, (i - r * a_n, outer.negate()))
    if cls.tag is Clause.B:
        diag = integer_power(n, i).mul(surd_power(d, a_n, cls.h - i))
        return LambdaRow(i, diag)
    b_n = d.b_at(n)
    if cls.tag is Clause.C:
        # f_i = n^i e_i - b_n n^{i - b_n} e_{i - b_n}
        off = ExactScalar.from_integer(b_n).mul(integer_power(n, i - b_n)).negate()
        return LambdaRow(i, integer_power(n, i), (i - b_n, off))
    diag = integer_power(n, i).mul(surd_power(d, b_n, cls.h - i))
    return LambdaRow(i, diag)


class BasisExpander:
    """Memoized e-to-f expansion for one growth sequence.

    Chains are unrolled iteratively; the memo is append-only and each
    published expansion is immutable, so concurrent readers are safe as
    long as a single writer fills the cache.
    """

    def __init__(self, d: GrowthSequence):
        self.d = d
        self._memo: dict[int, ChainExpansion] = {}

    def e_in_f(self, i: int) -> ChainExpansion:
        if i in self._memo:
            return self._memo[i]
        # walk down the partner chain to a memoized or partnerless index
        pending: list[LambdaRow] = []
        cursor = i
        while cursor not in self._memo:
            row = lambda_row(cursor, self.d)
            pending.append(row)
            if row.partner is None:
                break
            cursor = row.partner[0]
        # build back up
        while pending:
            row = pending.pop()
            inv = row.diag.inverse()
            coeffs: dict[int, ExactScalar] = {row.index: inv}
            if row.partner is not None:
                j, off = row.partner
                factor = off.negate().mul(inv)
                for k, c in self._memo[j].coeffs:
                    coeffs[k] = c.mul(factor)
            ordered = tuple(sorted(coeffs.items(), reverse=True))
            self._memo[row.index] = ChainExpansion(row.index, ordered)
        return self._memo[i]


_EXPANDERS: dict[GrowthSequence, BasisExpander] = {}


def expander_for(d: GrowthSequence) -> BasisExpander:
    exp = _EXPANDERS.get(d)
    if exp is None:
        exp = _EXPANDERS[d] = BasisExpander(d)
    return exp


def f_in_e_roundtrip(i: int, d: GrowthSequence,
                     expander: BasisExpander | None = None) -> tuple[bool, dict]:
    """Substitute e_in_f back into the defining row of f_i.

    Exact success means coefficient 1 at index i and nothing anywhere else;
    on failure the nonzero residual is returned for diagnosis.
    """
    expander = expander or expander_for(d)
    row = lambda_row(i, d)
    acc: dict[int, ExactSum] = {}

    def feed(scale: ExactScalar, expansion: ChainExpansion):
        for k, c in expansion.coeffs:
            term = ExactSum.of(scale.mul(c))
            acc[k] = acc.get(k, ExactSum()).add(term)

    feed(row.diag, expander.e_in_f(i))
    if row.partner is not None:
        j, off = row.partner
        feed(off, expander.e_in_f(j))

    diff: dict[int, ExactSum] = {}
    for k, s in acc.items():
        want = ExactSum.of(ONE) if k == i else ExactSum()
        residual = s.add(want.negate())
        if not residual.is_zero():
            diff[k] = residual
    if i not in acc:
        diff[i] = ExactSum.of(ONE.negate())
    return (not diff), diff


def dump_basis_csv(d: GrowthSequence, i_max: int, path) -> None:
    """Debug dump: one row per index with clause data and float approximations."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "tag", "n", "r", "h", "partner", "diag_approx", "off_approx"])
        for i in range(i_max + 1):
            cls = classify(i, d)
            row = lambda_row(i, d)
            partner, off = ("", "")
            if row.partner is not None:
                partner = row.partner[0]
                off = repr(evaluate_float(row.partner[1]))
            writer.writerow([i, cls.tag.value, cls.n,
                             "" if cls.r is None else cls.r,
                             "" if cls.h is None else str(cls.h),
                             partner, repr(evaluate_float(row.diag)), off])
