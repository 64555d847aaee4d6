from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingerprinting.classical import GroupAssignment, lemma3_bound
from fingerprinting.oracle import (
    BudgetExceeded,
    OverlapMatrix,
    exhaustive_min_ne,
    exhaustive_min_ne_reference,
    min_f_over_diagonal,
    min_f_over_diagonal_exhaustive,
    ne_of_deterministic,
    verify_diagonal_dominance,
)
from fingerprinting.strategy import (
    ProtocolParams,
    SharedKeyDistribution,
    StrategyTriple,
    derive_referee,
    error_profile,
)


def erring_pairs(fp, fq):
    """Definition-level count: unequal (x, y) whose fingerprints some equal pair also produces."""
    n = len(fp)
    reachable = {(fp[x], fq[x]) for x in range(n)}
    return sum(1 for x in range(n) for y in range(n) if x != y and (fp[x], fq[y]) in reachable)


def deterministic_triple(fp, fq):
    alice, bob = fp.to_strategy(), fq.to_strategy()
    keys = SharedKeyDistribution.single()
    referee = derive_referee(alice, bob, keys)
    return StrategyTriple(ProtocolParams(fp.n, fp.m, fq.m), alice, bob, referee, keys)


# -- ne_of_deterministic ------------------------------------------------------


def test_ne_grouping_4_2():
    g = GroupAssignment.balanced(4, 2)
    assert ne_of_deterministic(g, g) == 4


def test_ne_identity():
    g = GroupAssignment(tuple(range(5)), 5)
    assert ne_of_deterministic(g, g) == 0


def test_ne_constant():
    g = GroupAssignment.constant(3, 2)
    s = OverlapMatrix.from_assignments(g, g)
    assert s.counts == ((3, 0), (0, 0))
    assert s.f_value() == 9
    assert ne_of_deterministic(g, g) == 6


def test_ne_mismatched_sizes():
    with pytest.raises(ValueError):
        ne_of_deterministic(GroupAssignment.balanced(3, 2), GroupAssignment.balanced(4, 2))


@pytest.mark.parametrize("n, ma, mb", [(3, 2, 2), (3, 2, 3), (4, 2, 2)])
def test_ne_matches_definition_and_profile(n, ma, mb):
    for fp in product(range(ma), repeat=n):
        for fq in product(range(mb), repeat=n):
            ga, gb = GroupAssignment(fp, ma), GroupAssignment(fq, mb)
            ne = ne_of_deterministic(ga, gb)
            assert ne == erring_pairs(fp, fq)
            if n == 3:
                prof = error_profile(deterministic_triple(ga, gb))
                assert prof.ne == ne
                # an average over unequal pairs never exceeds their maximum
                assert prof.wce >= Fraction(ne, n * n - n)


# -- exhaustive scan ----------------------------------------------------------


@pytest.mark.parametrize("n, ma, mb, expected", [(4, 2, 2, 4), (3, 3, 3, 0), (4, 2, 4, 4), (5, 2, 2, 8), (3, 2, 2, 2)])
def test_exhaustive_small(n, ma, mb, expected):
    report = exhaustive_min_ne(n, ma, mb)
    assert report.min_ne == expected
    assert report.matches_bound
    assert report.strategies_scanned == ma**n * mb**n


@pytest.mark.parametrize("n, ma, mb", [(3, 2, 2), (4, 2, 3), (4, 3, 2), (3, 3, 3), (2, 1, 3), (4, 1, 1)])
def test_kernel_agrees_with_reference_scan(n, ma, mb):
    assert exhaustive_min_ne(n, ma, mb).min_ne == exhaustive_min_ne_reference(n, ma, mb)


def test_reference_scan_matches_definition():
    best = min(
        erring_pairs(fp, fq) for fp in product(range(2), repeat=4) for fq in product(range(4), repeat=4)
    )
    assert best == exhaustive_min_ne_reference(4, 2, 4) == 4


def test_witnesses_reproduce_minimum():
    report = exhaustive_min_ne(5, 2, 3, max_witnesses=50)
    assert 0 < len(report.witnesses) <= 50
    assert report.witness_count >= len(report.witnesses)
    for fp, fq in report.witnesses:
        assert ne_of_deterministic(fp, fq) == report.min_ne


def test_witness_order_is_odometer():
    report = exhaustive_min_ne(4, 2, 2, max_witnesses=100)
    assert report.witness_count == len(report.witnesses)
    keys = [(fp.assignment, fq.assignment) for fp, fq in report.witnesses]
    assert keys == sorted(keys)


def test_pruned_scan_same_minimum():
    for args in [(5, 2, 2), (5, 3, 3), (4, 3, 2)]:
        full, pruned = exhaustive_min_ne(*args), exhaustive_min_ne(*args, prune=True)
        assert full.min_ne == pruned.min_ne
        assert pruned.strategies_scanned < full.strategies_scanned
        assert pruned.pruned


def test_budget_refusal():
    with pytest.raises(BudgetExceeded) as info:
        exhaustive_min_ne(9, 3, 3, budget=10**6)
    assert info.value.estimate == 3**18


def test_report_json():
    doc = exhaustive_min_ne(4, 2, 2, max_witnesses=1).to_json()
    assert doc["min_ne"] == 4 and doc["matches_bound"] is True
    assert doc["witnesses"] == [{"alice": [0, 0, 1, 1], "bob": [0, 0, 1, 1]}]


def test_oracle_formula_agreement_grid():
    for m in (1, 2, 3):
        for n in range(m, 9):
            if m**n * m**n > 3 * 10**7:
                continue
            report = exhaustive_min_ne(n, m, m, prune=True)
            assert report.min_ne == lemma3_bound(n, m), (n, m)


# -- F(s) ---------------------------------------------------------------------


@pytest.mark.parametrize("n, m, expected", [(4, 2, 8), (7, 3, 17), (5, 1, 25)])
def test_min_f(n, m, expected):
    assert min_f_over_diagonal(n, m) == expected
    assert min_f_over_diagonal_exhaustive(n, m) == expected


def test_min_f_against_compositions():
    for n in range(1, 13):
        for m in range(1, 5):
            assert min_f_over_diagonal(n, m) == min_f_over_diagonal_exhaustive(n, m)


def test_diagonal_dominance_examples():
    s = OverlapMatrix(((1, 1), (1, 1)))
    assert s.f_value() == 16 and s.diagonalized().f_value() == 8
    assert verify_diagonal_dominance(s)
    d = OverlapMatrix(((2, 0), (0, 3)))
    assert d.diagonalized() == d and verify_diagonal_dominance(d)
    skew = OverlapMatrix(((0, 3), (1, 0)))
    assert skew.diagonalized().f_value() == 10
    assert verify_diagonal_dominance(skew)


def test_unequal_counts():
    s = OverlapMatrix(((1, 1), (1, 1)))
    assert [s.unequal(a, b) for a in range(2) for b in range(2)] == [3, 3, 3, 3]


@st.composite
def overlap_matrices(draw):
    ma = draw(st.integers(1, 4))
    mb = draw(st.integers(1, 4))
    n = draw(st.integers(1, 20))
    labels = draw(st.lists(st.tuples(st.integers(0, ma - 1), st.integers(0, mb - 1)), min_size=n, max_size=n))
    counts = [[0] * mb for _ in range(ma)]
    for a, b in labels:
        counts[a][b] += 1
    return OverlapMatrix(tuple(map(tuple, counts)))


@settings(max_examples=2000, deadline=None)
@given(overlap_matrices())
def test_diagonal_dominance_property(s):
    assert verify_diagonal_dominance(s)
    assert s.f_value() == s.f_value_fast()


def test_diagonal_dominance_random_bulk():
    rng = np.random.default_rng(20240611)
    for _ in range(10_000):
        ma, mb = rng.integers(1, 5, size=2)
        n = int(rng.integers(1, 21))
        counts = np.zeros((ma, mb), dtype=int)
        np.add.at(counts, (rng.integers(0, ma, n), rng.integers(0, mb, n)), 1)
        assert verify_diagonal_dominance(OverlapMatrix(tuple(map(tuple, counts.tolist()))))
