"""Nuclearity certificate and column-norm report."""

import json

import pytest

from readop.certify import (
    certify_nuclear,
    check_column_norms,
    nuclear_norm_upper,
    row_sup_norms,
)
from readop.growth import GrowthSequence, generate_rapid
from readop.operator import tneg_rows_closed, truncate
from readop.scalars import Comparison, ExactScalar, ExactSum, compare, evaluate

D = GrowthSequence.from_flat((2, 3, 6, 7))
RAPID = generate_rapid(2)


def test_certificate_passes_for_generated_sequence():
    cert = certify_nuclear(RAPID, 2)
    assert cert.verdict == "pass"
    assert cert.rapidity_ok
    assert cert.total.hi < 2
    assert cert.tail_conditional_beyond_level == 2


def test_certificate_row_bounds_exact():
    cert = certify_nuclear(RAPID, 2)
    a_rows = [r for r in cert.rows if r.family == "A"]
    c_rows = [r for r in cert.rows if r.family == "C"]
    assert {r.level for r in a_rows} == {0, 1}
    assert {r.level for r in c_rows} == {1, 2}
    assert len(c_rows) == 3  # one row per (n, r): (1,1), (2,1), (2,2)
    for r in cert.rows:
        assert r.ok, f"row {r.row} exceeds its bound"
    # A rows sit at 1 + v_m
    assert {r.row for r in a_rows} == {1, 1 + RAPID.v(1)}


def test_certificate_fails_for_small_sequence_naming_r2():
    cert = certify_nuclear(D)
    assert cert.verdict == "fail"
    assert not cert.rapidity_ok
    assert any("R2" in f and "'n': 1" in f for f in cert.rapidity_failures)


def test_certificate_total_includes_tails():
    cert = certify_nuclear(RAPID, 2)
    finite_hi = evaluate(cert.finite_part, 128).hi
    assert cert.total.hi >= finite_hi
    assert cert.a_tail == ExactScalar.pow2(-RAPID.v(2))
    assert cert.c_tail == ExactScalar.pow2(-2)


def test_certificate_monotone_in_n_max():
    c1 = certify_nuclear(RAPID, 1)
    c2 = certify_nuclear(RAPID, 2)
    assert c1.verdict == "pass" and c2.verdict == "pass"
    # the enclosed total never grows when more levels are materialized:
    # each materialized row is below the share of tail majorant it replaces
    assert c2.total.hi <= c1.total.hi


def test_a_row_partial_sum_below_one():
    # sum over A rows alone stays under sum 2^-(1+v_m) < 1
    cert = certify_nuclear(RAPID, 2)
    total = ExactSum()
    for r in cert.rows:
        if r.family == "A":
            total = total.add(ExactSum.of(r.sup_norm))
    assert compare(total, ExactScalar.from_integer(1)) is Comparison.LESS


def test_certificate_json_shape():
    doc = certify_nuclear(RAPID, 2).to_json()
    text = json.dumps(doc, sort_keys=True)
    back = json.loads(text)
    assert back["verdict"] == "pass"
    assert back["n_max"] == 2
    assert len(back["rows"]) == 5
    assert all(r["row_bound_holds"] for r in back["rows"])


# --- nuclear norm upper bound ------------------------------------------------

def test_nuclear_norm_upper_trivial():
    box = nuclear_norm_upper([])
    assert box.lo == 0 == box.hi
    x = ExactScalar.build(bases={3: 1}, q0=-2)
    box = nuclear_norm_upper([x])
    assert box.contains(evaluate(x, 128))


def test_nuclear_norm_upper_matches_finite_part():
    cert = certify_nuclear(RAPID, 2)
    box = nuclear_norm_upper([r.sup_norm for r in cert.rows])
    finite = evaluate(cert.finite_part, 128)
    assert box.lo == finite.lo and box.hi == finite.hi


def test_row_sups_from_truncation_agree_with_symbolic():
    n1 = RAPID.v(1)
    trunc = truncate(RAPID, n1)
    sups = row_sup_norms(trunc.minus)
    symbolic = tneg_rows_closed(RAPID, 2)
    for row, entry in sups.items():
        assert compare(entry, symbolic[row].sup_norm) is Comparison.EQUAL


# --- column norms -------------------------------------------------------------

def test_column0_norm_exactly_one():
    report = check_column_norms(D, 0)
    rec = report.records[0]
    assert rec.verdict is Comparison.EQUAL
    assert rec.ok


def test_interior_c_column_norm_is_inverse_level():
    report = check_column_norms(D, 15)
    rec = report.records[14]  # C(2,1) interior: norm 1/2
    assert rec.norm == ExactSum.of(ExactScalar.pow2(-1))
    assert rec.ok


def test_b_interior_norm_exceeds_one_at_level1():
    # generated d has a B(1,0) interior; norm 2^(1/sqrt(8)) > 1 gets flagged
    report = check_column_norms(RAPID, 3)
    rec = report.records[2]
    assert rec.norm == ExactSum.of(ExactScalar.pow2(0, {8: 1}))
    assert not rec.ok


def test_small_d_norms_reported_not_fatal():
    report = check_column_norms(D, 25)
    assert not report.all_ok  # e.g. ||Tf_1|| = 2
    assert report.records[1].norm == ExactSum.of(ExactScalar.pow2(1))
    worst = report.worst()
    assert worst.index == 19  # the heavy degenerate endpoint column
    assert report.to_json()["worst_column"] == 19


def test_column_norm_range_check():
    with pytest.raises(IndexError):
        check_column_norms(D, 26)
