"""Column construction, oracle/closed agreement, splitting, truncation."""

from fractions import Fraction

import numpy as np
import pytest

from readop.basis import BasisExpander, clause_intervals
from readop.growth import GrowthSequence, generate_rapid
from readop.operator import (
    DegenerateStructure,
    a_family_value,
    c_family_value,
    export_matrix_csv,
    import_matrix_csv,
    modulus_split,
    t_column_closed,
    t_column_oracle,
    tneg_rows_closed,
    truncate,
)
from readop.scalars import ExactScalar, ExactSum, ONE, evaluate_float

D = GrowthSequence.from_flat((2, 3, 6, 7))


def p2(q, surds=None):
    return ExactScalar.pow2(Fraction(q), {m: Fraction(c) for m, c in (surds or {}).items()})


def times(x, k):
    return x.mul(ExactScalar.from_integer(k))


def _expected_columns_2367():
    """Hand-derived full column table for d = (2,3,6,7), indices 0..25."""
    cols = {
        0: {1: ONE},
        1: {2: ONE, 0: ONE},
        2: {3: p2(0, {3: Fraction(3, 2)}), 1: ONE.negate()},
        3: {4: p2(0, {3: 1})},
        4: {5: p2(0, {3: Fraction(-5, 2)}),
            2: times(p2(0, {3: Fraction(-5, 2)}), 3),
            0: times(p2(0, {3: Fraction(-5, 2)}), 3)},
        5: {6: p2(-7), 3: times(p2(0, {3: Fraction(3, 2)}), -3), 0: p2(-6)},
        11: {12: p2(-5), 6: p2(-6).negate()},
        12: {13: p2(-1), 6: times(p2(-2), 7), 0: times(p2(-1), 7), 1: ONE.negate()},
        19: {20: p2(-1, {7: Fraction(19, 2)}),
             13: times(p2(-1), -7),
             6: times(p2(-2), -49),
             0: times(p2(-1), -49)},
        25: {26: p2(-1, {7: Fraction(-29, 2)}),
             19: times(p2(-1, {7: Fraction(-29, 2)}), 7),
             12: times(p2(-1, {7: Fraction(-29, 2)}), 49),
             0: times(p2(-1, {7: Fraction(-29, 2)}), 49)},
    }
    for i in range(6, 11):
        cols[i] = {i + 1: ONE}
    for i in range(13, 19):
        cols[i] = {i + 1: p2(-1)}
    for i in range(20, 25):
        cols[i] = {i + 1: p2(-1, {7: 1})}
    return cols


def test_columns_match_hand_derivation():
    expected = _expected_columns_2367()
    for i in range(0, 26):
        col = t_column_oracle(i, D)
        want = {k: ExactSum.of(v) for k, v in expected[i].items()}
        assert col.entries == want, f"column {i}"


def test_column_zero_single_unit_entry():
    col = t_column_oracle(0, D)
    assert col.entries == {1: ExactSum.of(ONE)}  # exponent vanishes at a_1 = 2


def test_interior_clause_a_column():
    col = t_column_oracle(7, D)  # A(2,1) interior: (n-r)^-1 = 1
    assert col.entries == {8: ExactSum.of(ONE)}


def test_closed_equals_oracle_exhaustive_2367():
    for i in range(0, 26):
        assert t_column_closed(i, D) == t_column_oracle(i, D), f"column {i}"


def test_closed_equals_oracle_generated_windows():
    d = generate_rapid(2)
    ex = BasisExpander(d)
    indices = set(range(0, 64))
    for n in (1, 2):
        for _, _, lo, hi in clause_intervals(d, n):
            if lo > hi:
                continue
            indices.update([lo, lo + 1, (lo + hi) // 2, hi - 1, hi])
    for i in sorted(x for x in indices if 0 <= x < d.v(2)):
        assert t_column_closed(i, d) == t_column_oracle(i, d, ex), f"column {i}"


def test_column_beyond_range_rejected():
    with pytest.raises(IndexError):
        t_column_oracle(26, D)
    with pytest.raises(IndexError):
        t_column_closed(26, D)


def test_float_linear_algebra_cross_oracle():
    """Invert the basis matrix numerically and rebuild T as floats."""
    from readop.basis import lambda_row
    size = 27
    lam = np.zeros((size, size))
    for i in range(size):
        row = lambda_row(i, D)
        lam[i, i] = evaluate_float(row.diag)
        if row.partner:
            lam[i, row.partner[0]] = evaluate_float(row.partner[1])
    lam_inv = np.linalg.inv(lam)
    t_float = np.zeros((size, size))
    for j in range(size - 1):  # column 26 would need e_27
        row = lambda_row(j, D)
        parts = [(lam[j, j], j)] + ([(lam[j, row.partner[0]], row.partner[0])]
                                    if row.partner else [])
        for coeff, k in parts:
            t_float[:, j] += coeff * lam_inv[k + 1, :]
    trunc = truncate(D, 26)
    dense = trunc.to_dense("T")
    assert np.allclose(dense[:, :26], t_float[:, :26], rtol=1e-8, atol=1e-9)


# --- modulus split ----------------------------------------------------------

def test_split_column_zero_has_empty_negative_part():
    pos, neg, mod = modulus_split(t_column_oracle(0, D))
    assert not neg.entries
    assert pos.entries == mod.entries


def test_split_a_endpoint_negative_support():
    pos, neg, mod = modulus_split(t_column_oracle(2, D))
    assert sorted(neg.entries) == [1]
    assert neg.entries[1] == ExactSum.of(ONE)  # stored as magnitude
    assert sorted(pos.entries) == [3]


def test_split_all_positive_column():
    pos, neg, mod = modulus_split(t_column_oracle(25, D))
    assert not neg.entries
    assert mod.entries == pos.entries


# --- truncation -------------------------------------------------------------

def test_truncate_two_by_two():
    trunc = truncate(D, 1)
    dense = trunc.to_dense("T")
    assert np.array_equal(dense, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert trunc.flags == {1: [2]}


def test_truncate_block_aligned_flags_only_last_column():
    trunc = truncate(D, 26)
    assert trunc.flags == {26: [27]}
    trunc5 = truncate(D, 5)
    assert trunc5.flags == {5: [6]}


def test_truncate_unaligned_flags():
    trunc = truncate(D, 10)
    assert trunc.flags == {10: [11]}


def test_truncated_boundary_column_keeps_negative_side():
    trunc = truncate(D, 26)
    col = trunc.columns[26]
    want = times(p2(0, {7: Fraction(19, 2)}), -7).mul(ExactScalar.pow2(-1))
    assert col.entries == {20: ExactSum.of(want)}


def test_structure_subdiagonal_positive_and_hessenberg():
    for size in (5, 10, 26):
        trunc = truncate(D, size)
        for col in trunc.columns:
            for row in col.entries:
                assert row <= col.index + 1
        for i in range(size):
            sub = trunc.columns[i].entries.get(i + 1)
            assert sub is not None
            assert all(t.sign == 1 for t in sub.terms)


def test_lattice_identities_exact():
    trunc = truncate(D, 26)
    for i in range(27):
        col, pos, neg = trunc.columns[i], trunc.plus[i], trunc.minus[i]
        mod = trunc.modulus[i]
        assert not (set(pos.entries) & set(neg.entries))  # min(T+, T-) = 0
        for row in set(col.entries) | set(pos.entries) | set(neg.entries):
            t = col.entries.get(row, ExactSum())
            p = pos.entries.get(row, ExactSum())
            m = neg.entries.get(row, ExactSum())
            assert t == p.add(m.negate()), (row, i)
            assert mod.entries.get(row, ExactSum()) == p.add(m), (row, i)


def test_truncate_range_checks():
    with pytest.raises(IndexError):
        truncate(D, 27)
    with pytest.raises(IndexError):
        truncate(D, 0)


# --- negative part rows, symbolically ---------------------------------------

def test_tneg_rows_rejects_degenerate_sequence():
    with pytest.raises(DegenerateStructure):
        tneg_rows_closed(D, 2)


def test_tneg_rows_level1_of_degenerate_is_fine():
    rows = tneg_rows_closed(D, 1)
    assert sorted(rows) == [1, 3]
    assert rows[1].family == "A" and rows[1].entries == [(2, a_family_value(D, 0))]
    assert rows[3].family == "C" and rows[3].entries == [(5, c_family_value(D, 1))]
    # hand values: eps2(0) = 1; C value = 3 * 2^(1.5/sqrt(3))
    assert rows[1].sup_norm == ONE
    assert rows[3].sup_norm == times(p2(0, {3: Fraction(3, 2)}), 3)


def test_tneg_rows_match_truncation_generated():
    d = generate_rapid(2)
    n1 = d.v(1)
    trunc = truncate(d, n1)
    from_trunc = {}
    for col in trunc.minus:
        for row, entry in col.entries.items():
            from_trunc[(row, col.index)] = entry
    symbolic = {}
    for row_obj in tneg_rows_closed(d, 2).values():
        for colidx, value in row_obj.entries:
            if colidx <= n1 and row_obj.row <= n1:
                symbolic[(row_obj.row, colidx)] = ExactSum.of(value)
    assert from_trunc == symbolic


def test_tneg_rows_a_family_uniform_across_pairs():
    d = generate_rapid(2)
    rows = tneg_rows_closed(d, 2)
    row1 = rows[1]  # m = 0 collects (n, r) = (1, 1) and (2, 2)
    assert [c for c, _ in row1.entries] == [d.a_at(1), d.v(0) + 2 * d.a_at(2)]
    assert len({v for _, v in row1.entries}) == 1


def test_column0_of_negative_part_always_empty():
    for d in (D, generate_rapid(1)):
        _, neg, _ = modulus_split(t_column_oracle(0, d))
        assert not neg.entries


def test_surd_closure_across_whole_truncation():
    from readop.basis import allowed_surd_keys
    for d in (D, generate_rapid(1)):
        allowed = allowed_surd_keys(d)
        trunc = truncate(d, d.v(d.levels) if d.levels == 1 else 26)
        for col in trunc.columns:
            for entry in col.entries.values():
                for term in entry.terms:
                    assert term.surd_keys() <= allowed


# --- export -----------------------------------------------------------------

def test_matrix_csv_roundtrip(tmp_path):
    trunc = truncate(D, 5)
    path = tmp_path / "t.csv"
    export_matrix_csv(trunc, path, "T")
    back = import_matrix_csv(path)
    for col in trunc.columns:
        for row, entry in col.entries.items():
            assert back[(row, col.index)] == entry
    assert len(back) == sum(len(c.entries) for c in trunc.columns)
