import json
from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingerprinting.classical import GroupAssignment, grouping_strategy, permuted_grouping
from fingerprinting.strategy import (
    PartyStrategy,
    ProtocolParams,
    RefereeRule,
    SharedKeyDistribution,
    StrategyTriple,
    acceptance_matrix,
    acceptance_probability,
    derive_referee,
    error_profile,
    from_json,
    is_one_sided,
    to_json,
)

F = Fraction


def constant_triple(n, m, a=0, b=0, referee=None):
    alice = GroupAssignment.constant(n, m, a).to_strategy()
    bob = GroupAssignment.constant(n, m, b).to_strategy()
    referee = referee or RefereeRule.identity(m)
    return StrategyTriple(ProtocolParams.symmetric(n, m), alice, bob, referee, SharedKeyDistribution.single())


# -- validation ---------------------------------------------------------------


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        ProtocolParams(0, 2, 2)
    with pytest.raises(ValueError):
        ProtocolParams(3, 2, 0)
    assert ProtocolParams(5, 2, 4).m == 2


def test_key_weights_must_sum_to_one_exactly():
    with pytest.raises(ValueError):
        SharedKeyDistribution([F(1, 3), F(1, 3)])
    with pytest.raises(ValueError):
        SharedKeyDistribution([F(3, 2), F(-1, 2)])
    SharedKeyDistribution([F(1, 3), F(2, 3)])


def test_floats_are_rejected():
    with pytest.raises(TypeError):
        SharedKeyDistribution([0.5, 0.5])


def test_rows_must_be_stochastic():
    with pytest.raises(ValueError):
        PartyStrategy([[[F(1, 2), F(1, 3)]]], 1, 2)
    with pytest.raises(ValueError):
        PartyStrategy([[[F(3, 2), F(-1, 2)]]], 1, 2)


def test_triple_dimension_checks():
    alice = GroupAssignment.balanced(3, 2).to_strategy()
    with pytest.raises(ValueError):
        StrategyTriple(ProtocolParams(3, 2, 2), alice, alice, RefereeRule.identity(3), SharedKeyDistribution.single())
    with pytest.raises(ValueError):
        StrategyTriple(
            ProtocolParams(3, 2, 2), alice, alice, RefereeRule.identity(2), SharedKeyDistribution.uniform(2)
        )


def test_deterministic_flags():
    assert grouping_strategy(4, 2).is_deterministic
    assert not permuted_grouping(3, 2).is_deterministic  # keyed
    assert permuted_grouping(3, 2).alice.is_deterministic
    assert not RefereeRule(((F(1, 2),),)).is_deterministic


# -- acceptance_probability ---------------------------------------------------


def test_acceptance_all_mass_on_accepting_pair():
    t = constant_triple(4, 2)
    assert all(acceptance_probability(t, x, y) == 1 for x in range(4) for y in range(4))


def test_acceptance_grouping_4_2():
    t = grouping_strategy(4, 2)
    assert acceptance_probability(t, 0, 2) == 1  # same group
    assert acceptance_probability(t, 0, 1) == 0


def test_acceptance_permuted_3_2_against_enumeration():
    # oracle: count permutations placing 0 and 1 in a common group
    same = sum(p[0] % 2 == p[1] % 2 for p in permutations(range(3)))
    assert F(same, 6) == F(1, 3)
    t = permuted_grouping(3, 2)
    for x in range(3):
        for y in range(3):
            assert acceptance_probability(t, x, y) == (1 if x == y else F(1, 3))


def test_acceptance_index_errors():
    t = grouping_strategy(3, 2)
    with pytest.raises(IndexError):
        acceptance_probability(t, 3, 0)
    with pytest.raises(IndexError):
        acceptance_probability(t, 0, -1)


def test_acceptance_matrix_matches_pointwise():
    t = permuted_grouping(4, 3)
    p1 = acceptance_matrix(t)
    assert all(p1[x][y] == acceptance_probability(t, x, y) for x in range(4) for y in range(4))


# -- error_profile ------------------------------------------------------------


def test_profile_grouping_4_2():
    prof = error_profile(grouping_strategy(4, 2))
    assert prof.wce == 1
    assert prof.ne == 4


def test_profile_permuted_4_2():
    prof = error_profile(permuted_grouping(4, 2))
    assert prof.wce == F(1, 3)
    assert prof.unequal_errors() == [F(1, 3)] * 12
    assert all(prof.pe[x][x] == 0 for x in range(4))


def test_profile_identity_fingerprints():
    prof = error_profile(grouping_strategy(5, 5))
    assert prof.wce == 0 and prof.ne == 0


def test_profile_defining_identities():
    t = permuted_grouping(3, 2).with_referee(RefereeRule(((F(1, 2), F(1, 4)), (F(0), F(1)))))
    prof = error_profile(t)
    for x in range(3):
        for y in range(3):
            if x == y:
                assert prof.pe[x][y] == 1 - prof.p1[x][y]
            else:
                assert prof.pe[x][y] == prof.p1[x][y]
    assert prof.wce == max(v for row in prof.pe for v in row)
    assert prof.ne == sum(v for row in prof.pe for v in row)


def test_profile_refuses_huge_key_sets():
    with pytest.raises(ValueError):
        error_profile(permuted_grouping(9, 2), max_keys=1000)


def test_m_equals_one():
    t = grouping_strategy(3, 1)
    prof = error_profile(t)
    assert is_one_sided(t)
    assert prof.wce == 1


# -- is_one_sided -------------------------------------------------------------


def test_one_sided_cases():
    assert is_one_sided(grouping_strategy(4, 2))
    assert is_one_sided(permuted_grouping(4, 2))
    never = grouping_strategy(3, 2).with_referee(RefereeRule.constant(2, 2, 0))
    assert not is_one_sided(never)


# -- derive_referee -----------------------------------------------------------


def test_derive_referee_grouping_is_identity():
    t = grouping_strategy(4, 2)
    assert derive_referee(t.alice, t.bob, t.key_dist) == RefereeRule.identity(2)


def test_derive_referee_constant_parties():
    t = constant_triple(3, 2, a=0, b=1)
    r = derive_referee(t.alice, t.bob, t.key_dist)
    assert r.accept == ((0, 1), (0, 0))


def test_derive_referee_full_support():
    table = [[F(1, 3), F(2, 3)], [F(1, 2), F(1, 2)], [F(1, 5), F(4, 5)]]
    party = PartyStrategy([table], 3, 2)
    r = derive_referee(party, party, SharedKeyDistribution.single())
    assert all(v == 1 for row in r.accept for v in row)


def test_derive_referee_ignores_zero_weight_keys():
    a0 = GroupAssignment.constant(2, 2, 0).to_strategy().tables[0]
    a1 = GroupAssignment.constant(2, 2, 1).to_strategy().tables[0]
    party = PartyStrategy([a0, a1], 2, 2)
    r = derive_referee(party, party, SharedKeyDistribution([F(1), F(0)]))
    assert r.accept == ((1, 0), (0, 0))


@st.composite
def one_sided_triples(draw):
    n = draw(st.integers(1, 4))
    ma = draw(st.integers(1, 4))
    mb = draw(st.integers(1, 4))
    K = draw(st.integers(1, 3))

    def row(m):
        raw = draw(st.lists(st.integers(0, 3), min_size=m, max_size=m).filter(any))
        return [F(v, sum(raw)) for v in raw]

    raw_w = draw(st.lists(st.integers(1, 4), min_size=K, max_size=K))
    keys = SharedKeyDistribution([F(w, sum(raw_w)) for w in raw_w])
    alice = PartyStrategy([[row(ma) for _ in range(n)] for _ in range(K)], n, ma)
    bob = PartyStrategy([[row(mb) for _ in range(n)] for _ in range(K)], n, mb)
    forced = derive_referee(alice, bob, keys)
    # any referee that accepts the forced pairs is one-sided; extra mass elsewhere is random
    extra = [[F(draw(st.integers(0, 4)), 4) for _ in range(mb)] for _ in range(ma)]
    accept = [[F(1) if forced.accept[a][b] else extra[a][b] for b in range(mb)] for a in range(ma)]
    return StrategyTriple(ProtocolParams(n, ma, mb), alice, bob, RefereeRule(accept), keys)


@settings(max_examples=60, deadline=None)
@given(one_sided_triples())
def test_derived_referee_never_increases_error(triple):
    assert is_one_sided(triple)
    derived = triple.with_referee(derive_referee(triple.alice, triple.bob, triple.key_dist))
    assert is_one_sided(derived)
    before, after = error_profile(triple), error_profile(derived)
    for x in range(triple.n):
        for y in range(triple.n):
            assert after.pe[x][y] <= before.pe[x][y]


# -- JSON ---------------------------------------------------------------------


def test_json_roundtrip():
    t = permuted_grouping(3, 2).with_referee(RefereeRule(((F(1), F(1, 7)), (F(0), F(1)))))
    doc = json.loads(json.dumps(to_json(t)))
    assert doc["schema"] == "fingerprinting.strategy/1"
    assert doc["key_weights"][0] == "1/6"
    back = from_json(doc)
    assert back.alice == t.alice and back.bob == t.bob
    assert back.referee == t.referee and back.key_dist == t.key_dist
    assert error_profile(back) == error_profile(t)


def test_json_rejects_plain_numbers():
    doc = to_json(grouping_strategy(2, 2))
    doc["key_weights"] = [1]
    with pytest.raises(ValueError):
        from_json(doc)


def test_json_refuses_huge():
    with pytest.raises(ValueError):
        to_json(permuted_grouping(9, 2))
