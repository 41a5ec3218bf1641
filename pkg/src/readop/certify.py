"""Machine-checkable certificates: nuclearity of the negative part, column norms.

The negative part has one entry family per A-row (1 + v_m) and one per
C-row (n a_n + (r-1) b_n + 1).  Summing exact row sup-norms over the
materialized levels and majorizing the rest geometrically certifies the
nuclear-norm bound nu < 2, conditional on the (unmaterializable) higher
levels continuing to satisfy the rapidity inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .growth import GrowthSequence, check_rapidity
from .operator import (
    SparseColumn,
    TNegRow,
    UndecidableSign,
    t_column_oracle,
    tneg_rows_closed,
)
from .scalars import (
    Comparison,
    ExactScalar,
    ExactSum,
    Interval,
    as_sum,
    compare,
    evaluate,
    scalar_to_json,
    sign_of,
    sum_to_json,
)

__all__ = [
    "ColumnNormReport",
    "NuclearCertificate",
    "RowAudit",
    "certify_nuclear",
    "check_column_norms",
    "nuclear_norm_upper",
    "row_sup_norms",
]


def _interval_json(box: Interval) -> dict:
    return {"lo": str(box.lo), "hi": str(box.hi), "precision": box.precision}


@dataclass
class RowAudit:
    row: int
    family: str
    level: int
    sup_norm: ExactScalar
    bound: ExactScalar
    verdict: Comparison  # sup_norm vs bound

    @property
    def ok(self) -> bool:
        return self.verdict in (Comparison.LESS, Comparison.EQUAL)

    def to_json(self) -> dict:
        return {
            "row": self.row,
            "family": self.family,
            "level": self.level,
            "sup_norm": scalar_to_json(self.sup_norm),
            "sup_norm_enclosure": _interval_json(evaluate(self.sup_norm, 128)),
            "bound": scalar_to_json(self.bound),
            "row_bound_holds": self.ok,
        }


@dataclass
class NuclearCertificate:
    d: GrowthSequence
    n_max: int
    rapidity_ok: bool
    rapidity_failures: list[str]
    rows: list[RowAudit]
    finite_part: ExactSum
    a_tail: ExactScalar
    c_tail: ExactScalar
    tail_conditional_beyond_level: int
    total: Interval | None
    verdict: str  # "pass" | "fail" | "unknown"

    def to_json(self) -> dict:
        return {
            "schema": "readop-nuclear-certificate/1",
            "levels": {"a": [str(x) for x in self.d.a], "b": [str(x) for x in self.d.b]},
            "n_max": self.n_max,
            "rapidity_ok": self.rapidity_ok,
            "rapidity_failures": self.rapidity_failures,
            "rows": [r.to_json() for r in self.rows],
            "finite_part": sum_to_json(self.finite_part),
            "finite_part_enclosure": _interval_json(evaluate(self.finite_part, 128)),
            "a_tail_majorant": scalar_to_json(self.a_tail),
            "c_tail_majorant": scalar_to_json(self.c_tail),
            "tail_conditional_beyond_level": self.tail_conditional_beyond_level,
            "total_enclosure": _interval_json(self.total) if self.total else None,
            "verdict": self.verdict,
        }


def certify_nuclear(d: GrowthSequence, n_max: int | None = None) -> NuclearCertificate:
    """Certify the nuclear-norm bound: sum of row sup-norms of T^- is < 2.

    Row values for levels <= n_max are exact; the tail over higher levels is
    majorized by 2^-v_{n_max} (A family) plus 2^-n_max (C family), valid for
    any continuation that keeps satisfying R1/R2.  A rapidity failure on the
    materialized levels yields a Fail carrying the violated inequalities.
    """
    n_max = d.levels if n_max is None else n_max
    if not 1 <= n_max <= d.levels:
        raise ValueError(f"n_max must be in [1, {d.levels}]")
    rap = check_rapidity(d)
    failures = [f"{r.name}{r.params}" for r in rap.rapidity if not r.ok]
    if not rap.rapidity_ok:
        return NuclearCertificate(
            d, n_max, False, failures, [], ExactSum(),
            ExactScalar.pow2(-d.v(n_max)), ExactScalar.pow2(-n_max),
            d.levels, None, "fail")

    symbolic = tneg_rows_closed(d, n_max)
    audits: list[RowAudit] = []
    finite = ExactSum()
    for row in sorted(symbolic):
        tn: TNegRow = symbolic[row]
        if tn.family == "A":
            bound = ExactScalar.pow2(-(1 + d.v(tn.level)))
        else:
            bound = ExactScalar.pow2(-tn.level)
        audits.append(RowAudit(tn.row, tn.family, tn.level, tn.sup_norm, bound,
                               compare(tn.sup_norm, bound)))
        finite = finite.add(ExactSum.of(tn.sup_norm))

    a_tail = ExactScalar.pow2(-d.v(n_max))
    c_tail = ExactScalar.pow2(-n_max)
    total_exact = finite.add(ExactSum.of(a_tail, c_tail))
    total_box = evaluate(total_exact, 128)
    c = compare(total_exact, ExactScalar.from_integer(2))
    if c is Comparison.UNKNOWN:
        verdict = "unknown"
    elif c is Comparison.LESS:
        verdict = "pass"
    else:
        verdict = "fail"
    if any(not audit.ok for audit in audits):
        verdict = "fail"
    return NuclearCertificate(d, n_max, True, [], audits, finite,
                              a_tail, c_tail, d.levels, total_box, verdict)


def row_sup_norms(columns: Iterable[SparseColumn]) -> dict[int, ExactSum]:
    """Per-row sup norm (max entry magnitude) of a nonnegative part."""
    rows: dict[int, ExactSum] = {}
    for col in columns:
        for row, entry in col.entries.items():
            cur = rows.get(row)
            if cur is None or compare(entry, cur) is Comparison.GREATER:
                rows[row] = entry
    return rows


def nuclear_norm_upper(rows: Iterable[ExactScalar | ExactSum],
                       precision: int = 128) -> Interval:
    """Enclosure of the nuclear-norm bound: the sum of row sup-norms."""
    total = ExactSum()
    for sup in rows:
        total = total.add(as_sum(sup))
    return evaluate(total, precision)


@dataclass
class ColumnNormRecord:
    index: int
    norm: ExactSum
    verdict: Comparison  # norm vs 1

    @property
    def ok(self) -> bool:
        return self.verdict in (Comparison.LESS, Comparison.EQUAL)


@dataclass
class ColumnNormReport:
    """Per-column l1 norms of T against the bound 1.

    The rapidity inequalities certified elsewhere do not by themselves
    force column norms <= 1, so violations are reported, not fatal.
    """

    records: list[ColumnNormRecord] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.records)

    def failures(self) -> list[ColumnNormRecord]:
        return [r for r in self.records if not r.ok]

    def worst(self) -> ColumnNormRecord:
        def hi(rec):
            return evaluate(rec.norm, 128).hi
        return max(self.records, key=hi)

    def to_json(self) -> dict:
        return {
            "schema": "readop-column-norms/1",
            "all_ok": self.all_ok,
            "worst_column": self.worst().index if self.records else None,
            "columns": [
                {"index": r.index,
                 "norm": sum_to_json(r.norm),
                 "norm_enclosure": _interval_json(evaluate(r.norm, 128)),
                 "at_most_one": r.ok}
                for r in self.records
            ],
        }


def check_column_norms(d: GrowthSequence, i_max: int) -> ColumnNormReport:
    """Exact ||Tf_i||_1 for i in [0, i_max], compared against 1."""
    if i_max + 1 > d.v(d.levels):
        raise IndexError(f"columns constructible only up to {d.v(d.levels) - 1}")
    report = ColumnNormReport()
    one = ExactScalar.from_integer(1)
    for i in range(i_max + 1):
        col = t_column_oracle(i, d)
        total = ExactSum()
        for row, entry in col.entries.items():
            s = sign_of(entry)
            if s is Comparison.UNKNOWN:
                raise UndecidableSign(row, i)
            total = total.add(entry if s is Comparison.GREATER else entry.negate())
        report.records.append(ColumnNormRecord(i, total, compare(total, one)))
    return report
