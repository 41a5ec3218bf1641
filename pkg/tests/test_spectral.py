"""Perron witnesses, norm decay, and pattern irreducibility."""

import numpy as np
import pytest

from readop.growth import GrowthSequence, generate_rapid
from readop.operator import truncate
from readop.spectral import (
    ZeroImage,
    dump_eigenvector_csv,
    dump_norm_sequence_csv,
    irreducibility_check,
    power_iteration,
    power_norm_sequence,
    tminus_eigenvector_check,
)

D = GrowthSequence.from_flat((2, 3, 6, 7))


@pytest.fixture(scope="module")
def trunc26():
    return truncate(D, 26)


@pytest.fixture(scope="module")
def trunc5():
    return truncate(D, 5)


def test_perron_modulus_converges(trunc26):
    rep = power_iteration(trunc26, "modulus")
    assert rep.converged
    assert rep.eigenvalue > 0
    assert rep.residual < 1e-8
    assert abs(np.abs(rep.eigenvector).sum() - 1) < 1e-12
    assert rep.eigenvector.min() > 0  # strictly positive on the whole block


def test_perron_plus_below_modulus(trunc26):
    mod = power_iteration(trunc26, "modulus")
    plus = power_iteration(trunc26, "plus")
    assert plus.converged and plus.residual < 1e-8
    assert plus.eigenvalue <= mod.eigenvalue  # entrywise domination
    comp0 = set(irreducibility_check(trunc26, "plus").component_of_zero)
    assert all(plus.eigenvector[i] > 0 for i in comp0)


def test_perron_monotone_across_block_sizes(trunc5, trunc26):
    small = power_iteration(trunc5, "modulus").eigenvalue
    large = power_iteration(trunc26, "modulus").eigenvalue
    assert small <= large + 1e-9  # principal submatrix of a nonnegative matrix


def test_minus_part_is_nilpotent_pattern(trunc26):
    with pytest.raises(ZeroImage):
        power_iteration(trunc26, "minus")


def test_t_itself_refused_for_perron(trunc26):
    with pytest.raises(ValueError):
        power_iteration(trunc26, "T")


def test_tminus_kills_f0():
    assert tminus_eigenvector_check(D)
    assert tminus_eigenvector_check(generate_rapid(1))


# --- norm sequences ----------------------------------------------------------

def test_norm_sequence_zero_matrix(trunc26):
    # the minus part is nilpotent at this truncation: roots hit exactly zero
    roots = power_norm_sequence(trunc26, "minus", 8)
    assert roots[-1] == 0.0


def test_norm_sequence_tracks_perron_value(trunc26):
    roots = power_norm_sequence(trunc26, "modulus", 64)
    lam = power_iteration(trunc26, "modulus").eigenvalue
    assert abs(roots[-1] - lam) / lam < 0.05
    # k-th roots of norms are always >= the spectral radius estimate
    assert all(r >= lam * 0.999 for r in roots[8:])


def test_norm_sequence_for_t_reported_without_claims(trunc26):
    roots = power_norm_sequence(trunc26, "T", 48)
    assert len(roots) == 48
    assert all(r >= 0 for r in roots)
    assert roots[-1] < roots[0]  # decay is the whole point of the witness


# --- irreducibility ----------------------------------------------------------

def test_modulus_strongly_connected_both_blocks(trunc5, trunc26):
    for tr in (trunc5, trunc26):
        rep = irreducibility_check(tr, "modulus")
        assert rep.strongly_connected
        assert rep.strongly_connected_excluding_flagged
        assert rep.subdiagonal_all_positive
        assert 1 in rep.row_zero_columns  # first clause-B endpoint returns to 0


def test_plus_strongly_connected_modulo_boundary(trunc5, trunc26):
    rep5 = irreducibility_check(trunc5, "plus")
    assert rep5.strongly_connected  # boundary column still returns to 0 here
    rep26 = irreducibility_check(trunc26, "plus")
    # the final column's positive continuation was cut: node 26 is isolated
    assert not rep26.strongly_connected
    assert rep26.component_sizes == [26, 1]
    assert rep26.strongly_connected_excluding_flagged
    assert rep26.flagged_columns == [26]


def test_dropping_row_zero_breaks_connectivity(trunc5, trunc26):
    for tr in (trunc5, trunc26):
        for which in ("modulus", "plus"):
            rep = irreducibility_check(tr, which, drop_row_zero=True)
            assert not rep.strongly_connected
            assert not rep.strongly_connected_excluding_flagged


def test_minus_pattern_never_connected(trunc26):
    rep = irreducibility_check(trunc26, "minus")
    assert not rep.strongly_connected
    assert rep.component_sizes[0] == 1  # all singletons: acyclic pattern


def test_csv_dumps(tmp_path, trunc5):
    rep = power_iteration(trunc5, "modulus")
    dump_eigenvector_csv(rep, tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().strip().splitlines()
    assert len(lines) == 7 and lines[0] == "index,value"
    roots = power_norm_sequence(trunc5, "modulus", 16)
    dump_norm_sequence_csv(roots, tmp_path / "roots.csv")
    lines = (tmp_path / "roots.csv").read_text().strip().splitlines()
    assert len(lines) == 17 and lines[0] == "k,norm_root"
