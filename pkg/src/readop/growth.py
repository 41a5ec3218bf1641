"""Growth sequences: validation, rapidity inequalities, generation.

The construction is driven by d = (a1, b1, a2, b2, ...).  Block boundaries
are v_n = n*(a_n + b_n), with a0 = 1 and v0 = 0 fixed.  Two families of
inequalities ("R1" and "R2" below) are what the nuclearity argument needs
from "d increases sufficiently rapidly"; they are checked exactly, and the
generator searches for the least sequence satisfying them.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .scalars import (
    Comparison,
    ExactScalar,
    PrecisionError,
    compare,
)

__all__ = [
    "CheckRecord",
    "GrowthSequence",
    "InvalidSequence",
    "ValidationReport",
    "check_rapidity",
    "generate_rapid",
    "load_d",
    "r1_sides",
    "r2_sides",
    "save_d",
    "validate_structural",
]


class InvalidSequence(ValueError):
    """Malformed or structurally invalid growth sequence."""


@dataclass(frozen=True)
class GrowthSequence:
    """a and b hold a1..aL and b1..bL; a0 = 1 and v0 = 0 are implicit."""

    a: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise InvalidSequence("a and b must have equal length")
        if not self.a:
            raise InvalidSequence("at least one level required")
        if any(x < 1 for x in self.a + self.b):
            raise InvalidSequence("entries must be positive integers")

    @staticmethod
    def from_flat(values) -> "GrowthSequence":
        vals = tuple(int(x) for x in values)
        if len(vals) % 2:
            raise InvalidSequence("flat form must interleave a_n, b_n")
        return GrowthSequence(vals[0::2], vals[1::2])

    @property
    def levels(self) -> int:
        return len(self.a)

    def a_at(self, n: int) -> int:
        """a_n with the a0 = 1 convention."""
        if n == 0:
            return 1
        return self.a[n - 1]

    def b_at(self, n: int) -> int:
        if not 1 <= n <= self.levels:
            raise IndexError(f"b_{n} undefined for {self.levels} levels")
        return self.b[n - 1]

    def v(self, n: int) -> int:
        """Block boundary v_n = n*(a_n + b_n); v_0 = 0."""
        if n == 0:
            return 0
        if not 1 <= n <= self.levels:
            raise IndexError(f"v_{n} undefined for {self.levels} levels")
        return n * (self.a[n - 1] + self.b[n - 1])

    def v_list(self) -> list[int]:
        return [self.v(n) for n in range(self.levels + 1)]

    def level_of(self, i: int) -> int:
        """The unique n with v_{n-1} < i <= v_n (0 maps to level 0)."""
        if i == 0:
            return 0
        vs = self.v_list()
        if i > vs[-1]:
            raise IndexError(f"index {i} beyond v_L = {vs[-1]}")
        return bisect_left(vs, i)


@dataclass
class CheckRecord:
    name: str
    params: dict
    ok: bool
    detail: str = ""
    unknown: bool = False


@dataclass
class ValidationReport:
    structural: list[CheckRecord] = field(default_factory=list)
    rapidity: list[CheckRecord] = field(default_factory=list)

    @property
    def structural_ok(self) -> bool:
        return all(r.ok for r in self.structural)

    @property
    def rapidity_ok(self) -> bool:
        return all(r.ok for r in self.rapidity)

    @property
    def ok(self) -> bool:
        return self.structural_ok and self.rapidity_ok

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.structural + self.rapidity if not r.ok]

    def to_json(self) -> dict:
        def rec(r):
            return {"name": r.name, "params": r.params, "ok": r.ok,
                    "detail": r.detail, "unknown": r.unknown}
        return {"structural": [rec(r) for r in self.structural],
                "rapidity": [rec(r) for r in self.rapidity],
                "structural_ok": self.structural_ok,
                "rapidity_ok": self.rapidity_ok}


def validate_structural(d: GrowthSequence) -> ValidationReport:
    """Interval well-formedness: interleaved increase, a_n > v_{n-1}, b_n > (n-1)a_n.

    a_1 >= 2 is also required so that index 1 falls in the opening clause-B
    interval (0, a_1); the column formulas for index 0 rely on that.
    """
    report = ValidationReport()
    rep = report.structural

    rep.append(CheckRecord("a1_at_least_2", {"n": 1}, d.a[0] >= 2,
                           f"a_1 = {d.a[0]}"))
    flat = []
    for x, y in zip(d.a, d.b):
        flat += [x, y]
    for k in range(len(flat) - 1):
        rep.append(CheckRecord("strictly_increasing", {"position": k},
                               flat[k] < flat[k + 1],
                               f"d[{k}] = {flat[k]}, d[{k + 1}] = {flat[k + 1]}"))
    for n in range(1, d.levels + 1):
        v_prev = d.v(n - 1)
        rep.append(CheckRecord("a_exceeds_previous_block", {"n": n},
                               d.a_at(n) > v_prev,
                               f"a_{n} = {d.a_at(n)} vs v_{n - 1} = {v_prev}"))
        rep.append(CheckRecord("b_exceeds_level_span", {"n": n},
                               d.b_at(n) > (n - 1) * d.a_at(n),
                               f"b_{n} = {d.b_at(n)} vs (n-1)a_n = {(n - 1) * d.a_at(n)}"))
    return report


def r1_sides(d_or_va, m: int, a_next: int | None = None):
    """Both sides of R1 at m:  a_m * 2**((1+v_m-a_{m+1}/2)/sqrt(a_{m+1}))  <=  2**-(1+v_m).

    Accepts either a GrowthSequence (a_next taken from it) or (v_m, a_m)
    pairs during generation, where a_{m+1} is the candidate under search.
    """
    if isinstance(d_or_va, GrowthSequence):
        d = d_or_va
        v_m, a_m = d.v(m), d.a_at(m)
        a_next = d.a_at(m + 1)
    else:
        v_m, a_m = d_or_va
        assert a_next is not None
    exp = Fraction(1 + v_m) - Fraction(a_next, 2)
    lhs = ExactScalar.build(bases={a_m: 1} if a_m > 1 else {},
                            surd_terms={a_next: exp})
    rhs = ExactScalar.pow2(-(1 + v_m))
    return lhs, rhs


def r2_sides(n: int, a_n: int, b_n: int):
    """Both sides of R2 at n:  b_n * 2**((1+n*a_n-b_n/2)/sqrt(b_n))  <=  2**-n."""
    exp = Fraction(1 + n * a_n) - Fraction(b_n, 2)
    lhs = ExactScalar.build(bases={b_n: 1} if b_n > 1 else {},
                            surd_terms={b_n: exp})
    rhs = ExactScalar.pow2(-n)
    return lhs, rhs


def _holds(lhs, rhs) -> tuple[bool, bool]:
    """(passes, unknown) for lhs <= rhs."""
    c = compare(lhs, rhs)
    if c is Comparison.UNKNOWN:
        return False, True
    return c in (Comparison.LESS, Comparison.EQUAL), False


def check_rapidity(d: GrowthSequence) -> ValidationReport:
    """Decide R1 per (n, r) pair and R2 per level, exactly.

    R1 for the pair (n, r) depends only on m = n - r, so pairs sharing m
    share a verdict; each record names both.  An undecidable comparison is
    reported as a flagged failure, never guessed.
    """
    report = ValidationReport()
    rep = report.rapidity
    r1_verdicts: dict[int, tuple[bool, bool]] = {}
    for m in range(d.levels):
        r1_verdicts[m] = _holds(*r1_sides(d, m))
    for n in range(1, d.levels + 1):
        for r in range(1, n + 1):
            m = n - r
            ok, unknown = r1_verdicts[m]
            rep.append(CheckRecord(
                "R1", {"n": n, "r": r, "m": m}, ok,
                f"a_{m}*2^((1+v_{m}-a_{m + 1}/2)/sqrt(a_{m + 1})) <= 2^-(1+v_{m})",
                unknown))
        ok, unknown = _holds(*r2_sides(n, d.a_at(n), d.b_at(n)))
        rep.append(CheckRecord(
            "R2", {"n": n}, ok,
            f"b_{n}*2^((1+{n}*a_{n}-b_{n}/2)/sqrt(b_{n})) <= 2^-{n}", unknown))
    return report


def _least_satisfying(predicate, lower: int, what: str) -> int:
    """Smallest value >= lower where predicate holds (predicate upward-closed)."""
    hi = max(lower, 2)
    while not predicate(hi):
        hi *= 2
        if hi > 1 << 200:
            raise PrecisionError(f"search for {what} diverged")
    lo = max(lower, 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid + 1
    # guard against any non-monotone pocket near the boundary
    while lo > lower and predicate(lo - 1):
        lo -= 1
    return lo


def generate_rapid(levels: int, seed: int = 2) -> GrowthSequence:
    """Least growth sequence passing structural and rapidity checks.

    Each a_n is the smallest integer satisfying R1 at m = n-1 (given the
    blocks below it) and each b_n the smallest satisfying R2 at n; the seed
    is the starting point of the search for a_1.  Deterministic.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if seed < 1:
        raise ValueError("seed must be a positive integer")
    a: list[int] = []
    b: list[int] = []

    def r1_pred(v_m, a_m):
        def pred(candidate):
            ok, unknown = _holds(*r1_sides((v_m, a_m), 0, candidate))
            if unknown:
                raise PrecisionError(
                    f"rapidity comparison undecidable while sizing level {len(a) + 1}")
            return ok
        return pred

    def r2_pred(n, a_n):
        def pred(candidate):
            ok, unknown = _holds(*r2_sides(n, a_n, candidate))
            if unknown:
                raise PrecisionError(
                    f"rapidity comparison undecidable while sizing level {n}")
            return ok
        return pred

    for n in range(1, levels + 1):
        v_prev = 0 if n == 1 else (n - 1) * (a[-1] + b[-1])
        a_prev = 1 if n == 1 else a[-1]
        lower = max(seed if n == 1 else 2, v_prev + 1, (b[-1] + 1) if b else 2)
        a_n = _least_satisfying(r1_pred(v_prev, a_prev), lower, f"a_{n}")
        lower_b = max(a_n + 1, (n - 1) * a_n + 1)
        b_n = _least_satisfying(r2_pred(n, a_n), lower_b, f"b_{n}")
        a.append(a_n)
        b.append(b_n)

    d = GrowthSequence(tuple(a), tuple(b))
    assert validate_structural(d).structural_ok
    for m in range(levels):
        # R1 forces the next block to clear the previous boundary
        assert d.v(m) < d.a_at(m + 1)
    return d


# --- d file format ----------------------------------------------------------


def save_d(d: GrowthSequence, path) -> None:
    doc = {"a": [str(x) for x in d.a], "b": [str(x) for x in d.b]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_d(path) -> GrowthSequence:
    try:
        doc = json.loads(Path(path).read_text())
        a = tuple(int(x) for x in doc["a"])
        b = tuple(int(x) for x in doc["b"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidSequence(f"cannot read growth sequence from {path}: {exc}") from exc
    return GrowthSequence(a, b)
