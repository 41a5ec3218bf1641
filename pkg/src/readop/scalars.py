"""Exact arithmetic for construction coefficients.

Values are sign * prod(p**n_p) * 2**(q0 + sum q_m/sqrt(m)): a finitely
supported product of integer powers times a power of 2 with a surd exponent.
Everything the clause formulas generate lives in this closed form, so
equality is structural and magnitudes never need to be expanded into digits.
Certified enclosures come from MPFR with directed rounding.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

import gmpy2

__all__ = [
    "Comparison",
    "ExactScalar",
    "ExactSum",
    "Interval",
    "PrecisionError",
    "SurdExponent",
    "canonicalize",
    "compare",
    "default_precision",
    "evaluate",
    "evaluate_float",
    "scalar_from_json",
    "scalar_to_json",
]

MAX_COMPARE_BITS = 4096
_SQUAREFREE_TRIAL_BOUND = 10**6


def default_precision() -> int:
    """Starting precision in bits; overridable via READOP_PRECISION."""
    try:
        p = int(os.environ.get("READOP_PRECISION", "64"))
    except ValueError:
        return 64
    return max(16, p)


class PrecisionError(RuntimeError):
    """Raised when a decision still needs more than MAX_COMPARE_BITS."""


class Comparison(Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1
    UNKNOWN = 2


# ---------------------------------------------------------------------------
# canonicalization helpers
# ---------------------------------------------------------------------------


def _split_perfect_power(b: int) -> tuple[int, int]:
    """Largest-k decomposition b = c**k (k maximal, so c is not a power)."""
    for k in range(b.bit_length(), 1, -1):
        root, exact = gmpy2.iroot(b, k)
        if exact:
            return int(root), k
    return b, 1


def canonicalize(raw: Mapping[int, int]) -> tuple[dict[int, int], int]:
    """Refine a base->exponent map to a pairwise-coprime basis.

    Perfect powers are split and all base-2 content is routed out; returns
    (coprime map with keys >= 3, integer exponent of 2).  The represented
    value is unchanged.  Equality of products built from a common atom set
    becomes structural equality of the refined maps.
    """
    queue: list[tuple[int, int]] = []
    for b, e in raw.items():
        if b < 2:
            raise ValueError(f"base must be >= 2, got {b}")
        if e != 0:
            queue.append((int(b), int(e)))

    basis: dict[int, int] = {}
    while queue:
        b, e = queue.pop()
        if b == 1 or e == 0:
            continue
        for p in list(basis):
            g = math.gcd(b, p)
            if g == 1:
                continue
            if g == b == p:
                basis[p] += e
                if basis[p] == 0:
                    del basis[p]
            else:
                ep = basis.pop(p)
                queue.extend(((g, ep), (p // g, ep), (g, e), (b // g, e)))
            break
        else:
            basis[b] = e

    out: dict[int, int] = {}
    two_exp = 0
    for b, e in basis.items():
        c, k = _split_perfect_power(b)
        if c == 2:
            two_exp += k * e
        else:
            out[c] = out.get(c, 0) + k * e
    return {b: e for b, e in sorted(out.items()) if e != 0}, two_exp


def squarefree_split(m: int) -> tuple[int, int]:
    """Write m = k*k*core with core squarefree.

    Trial division is bounded; a residual core that cannot be factored is
    returned as-is (SurdExponent.build repairs any resulting key dependence
    through exact perfect-square tests on key products).
    """
    if m < 1:
        raise ValueError("positive integer required")
    k, core = 1, m
    d = 2
    while d * d <= core and d <= _SQUAREFREE_TRIAL_BOUND:
        dd = d * d
        while core % dd == 0:
            core //= dd
            k *= d
        d += 1 if d == 2 else 2
    r = math.isqrt(core)
    if r * r == core:
        return k * r, 1
    return k, core


# ---------------------------------------------------------------------------
# surd exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurdExponent:
    """Exponent of 2 of the form rational + sum q_m / sqrt(m).

    Keys are squarefree and pairwise independent, so componentwise equality
    is value equality ({1} + {1/sqrt(m)} is linearly independent over Q).
    """

    rational: Fraction = Fraction(0)
    terms: tuple[tuple[int, Fraction], ...] = ()

    @staticmethod
    def build(rational: Fraction | int = 0,
              raw_terms: Mapping[int, Fraction] | None = None) -> "SurdExponent":
        q0 = Fraction(rational)
        acc: dict[int, Fraction] = {}
        for m, q in (raw_terms or {}).items():
            q = Fraction(q)
            if q == 0:
                continue
            if m < 2:
                raise ValueError(f"surd radicand must be >= 2, got {m}")
            k, core = squarefree_split(int(m))
            if core == 1:
                q0 += q / k
            else:
                acc[core] = acc.get(core, Fraction(0)) + q / k
        # merge keys whose product is a perfect square: same squarefree part
        keys = sorted(acc)
        merged: dict[int, Fraction] = {}
        for m in keys:
            placed = False
            for m0 in merged:
                prod = m0 * m
                t = math.isqrt(prod)
                if t * t == prod:
                    # 1/sqrt(m) == (m0/t) / sqrt(m0)
                    merged[m0] += acc[m] * Fraction(m0, t)
                    placed = True
                    break
            if not placed:
                merged[m] = acc[m]
        terms = tuple((m, q) for m, q in sorted(merged.items()) if q != 0)
        return SurdExponent(q0, terms)

    def is_zero(self) -> bool:
        return self.rational == 0 and not self.terms

    def __add__(self, other: "SurdExponent") -> "SurdExponent":
        raw = dict(self.terms)
        for m, q in other.terms:
            raw[m] = raw.get(m, Fraction(0)) + q
        return SurdExponent.build(self.rational + other.rational, raw)

    def __neg__(self) -> "SurdExponent":
        return SurdExponent(-self.rational, tuple((m, -q) for m, q in self.terms))

    def scaled(self, k: int) -> "SurdExponent":
        if k == 0:
            return SurdExponent()
        return SurdExponent(self.rational * k, tuple((m, q * k) for m, q in self.terms))


# ---------------------------------------------------------------------------
# exact scalars
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactScalar:
    """One canonical term: sign * prod(p**n_p) * 2**surd."""

    sign: int
    bases: tuple[tuple[int, int], ...]
    surd: SurdExponent

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or 1")
        if self.sign == 0 and (self.bases or not self.surd.is_zero()):
            raise ValueError("zero scalar must have empty magnitude")
        for b, e in self.bases:
            if b < 3 or e == 0:
                raise ValueError(f"invalid base entry ({b}, {e})")
        if any(b == 2 for b, _ in self.bases):
            raise ValueError("base 2 belongs in the surd rational part")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def build(sign: int = 1,
              bases: Mapping[int, int] | None = None,
              q0: Fraction | int = 0,
              surd_terms: Mapping[int, Fraction] | None = None) -> "ExactScalar":
        if sign == 0:
            return ZERO
        coprime, two_exp = canonicalize(bases or {})
        surd = SurdExponent.build(Fraction(q0) + two_exp, surd_terms)
        return ExactScalar(1 if sign > 0 else -1,
                           tuple(sorted(coprime.items())), surd)

    @staticmethod
    def from_integer(n: int) -> "ExactScalar":
        if n == 0:
            return ZERO
        return ExactScalar.build(sign=1 if n > 0 else -1, bases={abs(n): 1} if abs(n) != 1 else {})

    @staticmethod
    def from_fraction(q: Fraction) -> "ExactScalar":
        q = Fraction(q)
        if q == 0:
            return ZERO
        bases: dict[int, int] = {}
        if abs(q.numerator) != 1:
            bases[abs(q.numerator)] = 1
        if q.denominator != 1:
            bases[q.denominator] = bases.get(q.denominator, 0) - 1
        return ExactScalar.build(sign=1 if q > 0 else -1, bases=bases)

    @staticmethod
    def pow2(exponent: Fraction | int, surd_terms: Mapping[int, Fraction] | None = None) -> "ExactScalar":
        """2**(exponent + sum q_m/sqrt(m))."""
        return ExactScalar.build(q0=Fraction(exponent), surd_terms=surd_terms)

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.sign == 0

    def is_one(self) -> bool:
        return self.sign == 1 and not self.bases and self.surd.is_zero()

    def signature(self) -> tuple:
        """Magnitude key: two scalars with equal signature have equal |value|."""
        return (self.bases, self.surd.rational, self.surd.terms)

    def surd_keys(self) -> frozenset[int]:
        return frozenset(m for m, _ in self.surd.terms)

    # -- arithmetic ---------------------------------------------------------

    def mul(self, other: "ExactScalar") -> "ExactScalar":
        if self.sign == 0 or other.sign == 0:
            return ZERO
        raw = dict(self.bases)
        for b, e in other.bases:
            raw[b] = raw.get(b, 0) + e
        coprime, two_exp = canonicalize(raw)
        surd = self.surd + other.surd + SurdExponent(Fraction(two_exp))
        return ExactScalar(self.sign * other.sign, tuple(sorted(coprime.items())), surd)

    __mul__ = mul

    def inverse(self) -> "ExactScalar":
        if self.sign == 0:
            raise ZeroDivisionError("inverse of zero scalar")
        return ExactScalar(self.sign, tuple((b, -e) for b, e in self.bases), -self.surd)

    def pow_int(self, k: int) -> "ExactScalar":
        if self.sign == 0:
            if k <= 0:
                raise ZeroDivisionError("0 ** nonpositive")
            return ZERO
        if k == 0:
            return ONE
        sign = self.sign if k % 2 else 1
        return ExactScalar(sign, tuple((b, e * k) for b, e in self.bases), self.surd.scaled(k))

    def negate(self) -> "ExactScalar":
        if self.sign == 0:
            return self
        return ExactScalar(-self.sign, self.bases, self.surd)

    __neg__ = negate

    def abs(self) -> "ExactScalar":
        return self if self.sign >= 0 else self.negate()

    def __repr__(self):
        if self.sign == 0:
            return "ExactScalar(0)"
        parts = [] if self.sign > 0 else ["-1"]
        parts += [f"{b}^{e}" for b, e in self.bases]
        if self.surd.rational or self.surd.terms:
            s = [str(self.surd.rational)] if self.surd.rational else []
            s += [f"({q})/sqrt({m})" for m, q in self.surd.terms]
            parts.append("2^(" + "+".join(s) + ")")
        return "ExactScalar(" + ("*".join(parts) or "1") + ")"


ZERO = ExactScalar(0, (), SurdExponent())
ONE = ExactScalar(1, (), SurdExponent())


def product(factors: Iterable[ExactScalar]) -> ExactScalar:
    acc = ONE
    for f in factors:
        acc = acc.mul(f)
    return acc


def integer_power(base: int, exponent: int) -> ExactScalar:
    """base**exponent with the 0**0 == 1 convention the clauses rely on."""
    if exponent == 0:
        return ONE
    if base == 0:
        return ZERO
    return ExactScalar.from_integer(base).pow_int(exponent)


# ---------------------------------------------------------------------------
# sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactSum:
    """Canonically ordered sum of scalars; like-signature terms merged."""

    terms: tuple[ExactScalar, ...] = ()

    @staticmethod
    def of(*scalars: ExactScalar) -> "ExactSum":
        return ExactSum._merge(scalars)

    @staticmethod
    def _merge(scalars: Iterable[ExactScalar]) -> "ExactSum":
        pending = [s for s in scalars if s.sign != 0]
        by_sig: dict[tuple, ExactScalar] = {}
        while pending:
            s = pending.pop()
            cur = by_sig.pop(s.signature(), None)
            if cur is None:
                by_sig[s.signature()] = s
            elif cur.sign != s.sign:
                pass  # exact cancellation
            else:
                pending.append(s.mul(TWO))  # x + x == 2x; may cascade, re-enter
        return ExactSum(tuple(sorted(by_sig.values(), key=lambda t: (t.signature(), t.sign))))

    def add(self, other: "ExactSum") -> "ExactSum":
        return ExactSum._merge(self.terms + other.terms)

    __add__ = add

    def negate(self) -> "ExactSum":
        return ExactSum(tuple(t.negate() for t in self.terms))

    __neg__ = negate

    def scaled(self, s: ExactScalar) -> "ExactSum":
        return ExactSum._merge(tuple(t.mul(s) for t in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def single(self) -> ExactScalar:
        if len(self.terms) != 1:
            raise ValueError(f"sum has {len(self.terms)} terms, expected 1")
        return self.terms[0]


TWO = ExactScalar.pow2(1)


def as_sum(x: ExactScalar | ExactSum) -> ExactSum:
    if isinstance(x, ExactSum):
        return x
    return ExactSum.of(x)


# ---------------------------------------------------------------------------
# certified enclosures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Enclosure [lo, hi] of an exact value, endpoints MPFR with the stated precision."""

    lo: object
    hi: object
    precision: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order")

    def width(self):
        return self.hi - self.lo

    def contains(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def contains_value(self, x) -> bool:
        return self.lo <= x <= self.hi

    def midpoint_float(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __repr__(self):
        return f"Interval[{self.lo}, {self.hi}]@{self.precision}"


def _contexts(precision: int):
    kw = dict(precision=precision,
              emin=gmpy2.get_emin_min(), emax=gmpy2.get_emax_max(),
              trap_underflow=False, trap_overflow=False, trap_inexact=False)
    return (gmpy2.context(round=gmpy2.RoundDown, **kw),
            gmpy2.context(round=gmpy2.RoundUp, **kw))


def _exponent_interval(s: ExactScalar, down, up):
    """Directed enclosure of log2|s|."""
    zero = gmpy2.mpfr(0)
    lo = down.add(zero, gmpy2.mpq(s.surd.rational))
    hi = up.add(zero, gmpy2.mpq(s.surd.rational))
    for b, e in s.bases:
        l2_lo, l2_hi = down.log2(b), up.log2(b)
        if e >= 0:
            lo = down.add(lo, down.mul(l2_lo, e))
            hi = up.add(hi, up.mul(l2_hi, e))
        else:
            lo = down.add(lo, down.mul(l2_hi, e))
            hi = up.add(hi, up.mul(l2_lo, e))
    for m, q in s.surd.terms:
        # 1/sqrt is decreasing in m, but m is exact so both roundings apply to it directly
        r_lo, r_hi = down.rec_sqrt(m), up.rec_sqrt(m)
        qq = gmpy2.mpq(q)
        if q >= 0:
            lo = down.add(lo, down.mul(r_lo, qq))
            hi = up.add(hi, up.mul(r_hi, qq))
        else:
            lo = down.add(lo, down.mul(r_hi, qq))
            hi = up.add(hi, up.mul(r_lo, qq))
    return lo, hi


def _scalar_interval(s: ExactScalar, down, up):
    if s.sign == 0:
        z = gmpy2.mpfr(0)
        return z, z
    e_lo, e_hi = _exponent_interval(s, down, up)
    mag_lo, mag_hi = down.exp2(e_lo), up.exp2(e_hi)
    if s.sign > 0:
        return mag_lo, mag_hi
    return -mag_hi, -mag_lo  # mpfr negation is exact


def evaluate(x: ExactScalar | ExactSum, precision: int | None = None) -> Interval:
    """Certified enclosure; width shrinks monotonically as precision grows."""
    precision = precision or default_precision()
    if precision < 16:
        raise ValueError("precision must be >= 16 bits")
    down, up = _contexts(precision)
    terms = as_sum(x).terms
    lo = gmpy2.mpfr(0)
    hi = gmpy2.mpfr(0)
    for t in terms:
        t_lo, t_hi = _scalar_interval(t, down, up)
        lo = down.add(lo, t_lo)
        hi = up.add(hi, t_hi)
    return Interval(lo, hi, precision)


def evaluate_float(x: ExactScalar | ExactSum, precision: int = 128) -> float:
    """One-shot downcast used by the numerical witnesses."""
    return evaluate(x, precision).midpoint_float()


def compare(x: ExactScalar | ExactSum, y: ExactScalar | ExactSum,
            max_precision: int = MAX_COMPARE_BITS) -> Comparison:
    """Sound three-way comparison with precision escalation.

    EQUAL is only reported when x - y cancels to the canonical zero form;
    otherwise disjoint enclosures decide, and an overlap that survives
    max_precision is reported as UNKNOWN rather than guessed.
    """
    diff = as_sum(x).add(as_sum(y).negate())
    if diff.is_zero():
        return Comparison.EQUAL
    precision = min(default_precision(), max_precision)
    while True:
        box = evaluate(diff, precision)
        if box.lo > 0:
            return Comparison.GREATER
        if box.hi < 0:
            return Comparison.LESS
        if precision >= max_precision:
            return Comparison.UNKNOWN
        precision = min(2 * precision, max_precision)


def sign_of(x: ExactScalar | ExactSum,
            max_precision: int = MAX_COMPARE_BITS) -> Comparison:
    """Sign of x relative to zero (LESS means negative)."""
    s = as_sum(x)
    if len(s.terms) == 1:
        t = s.terms[0]
        return Comparison.GREATER if t.sign > 0 else Comparison.LESS
    return compare(s, ExactSum(), max_precision)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _frac_parse(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den or "1"))


def scalar_to_json(s: ExactScalar) -> dict:
    doc = {
        "sign": s.sign,
        "bases": [[str(b), e] for b, e in s.bases],
        "surd": {
            "q0": _frac_str(s.surd.rational),
            "terms": [[m, _frac_str(q)] for m, q in s.surd.terms],
        },
    }
    if s.sign == 0:
        doc["approx"] = "0"
    else:
        box = evaluate(s, 128)
        doc["approx"] = "{0:.20g}".format((box.lo + box.hi) / 2)
    return doc


def scalar_from_json(doc: dict) -> ExactScalar:
    sign = int(doc["sign"])
    if sign == 0:
        return ZERO
    bases = tuple((int(b), int(e)) for b, e in doc["bases"])
    surd = SurdExponent(_frac_parse(doc["surd"]["q0"]),
                        tuple((int(m), _frac_parse(q)) for m, q in doc["surd"]["terms"]))
    return ExactScalar(sign, bases, surd)


def sum_to_json(x: ExactSum) -> list[dict]:
    return [scalar_to_json(t) for t in x.terms]


def sum_from_json(docs: list[dict]) -> ExactSum:
    return ExactSum.of(*(scalar_from_json(d) for d in docs))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
