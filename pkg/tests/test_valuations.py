import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from oracles import demand_by_scan, proxy_by_enumeration
from proxyauction.errors import CapacityError, MalformedValuationError, ParameterError
from proxyauction.itemsets import EMPTY_SET, ItemSet
from proxyauction.valuations import (
    AdditiveValuation,
    CoverageValuation,
    ExplicitValuation,
    Instance,
    ProxyValuation,
    UnitDemandValuation,
    XOSValuation,
    is_monotone_normalized,
    is_subadditive,
)

S01 = ItemSet.from_indices([0, 1])

weights_st = st.lists(
    st.fractions(min_value=0, max_value=10, max_denominator=4), min_size=1, max_size=6
)


# -- value queries ----------------------------------------------------------


def test_additive_value():
    v = AdditiveValuation([3, 5])
    assert v.value(S01) == 8
    assert v.value(EMPTY_SET) == 0


def test_unit_demand_value():
    v = UnitDemandValuation([2, 1])
    assert v.value(S01) == 2
    assert v.value(EMPTY_SET) == 0


def test_xos_value_is_best_clause():
    v = XOSValuation(3, [[1, 0, 2], [0, 3, 0]])
    assert v.value(ItemSet.from_indices([0, 2])) == 3
    assert v.value(ItemSet.from_indices([1, 2])) == 3  # clause 2 gives 3, clause 1 gives 2
    assert v.value(EMPTY_SET) == 0


def test_coverage_value_counts_each_element_once():
    v = CoverageValuation([2, 5], covers=[[0], [0, 1], [1]])
    assert v.value(ItemSet.from_indices([0, 1])) == 7
    assert v.value(ItemSet.from_indices([0])) == 2
    assert v.value(ItemSet.full(3)) == 7


def test_explicit_requires_full_table():
    with pytest.raises(MalformedValuationError):
        ExplicitValuation(2, {0: 0, 1: 1, 2: 1})  # missing {0,1}
    with pytest.raises(MalformedValuationError):
        AdditiveValuation([-1])


# -- proxies ----------------------------------------------------------------


def test_proxy_additive_is_linear():
    pv = ProxyValuation(AdditiveValuation([3, 5]), F(1, 2))
    assert pv.value(S01) == 4
    assert pv.value(EMPTY_SET) == 0


def test_proxy_unit_demand_survival_formula():
    # enumerating the four survivor sets of {0,1}: (0 + 2 + 1 + 2) / 4
    pv = ProxyValuation(UnitDemandValuation([2, 1]), F(1, 2))
    assert pv.value(S01) == F(5, 4)


@given(weights_st, st.integers(min_value=1, max_value=4))
@settings(max_examples=60, deadline=None)
def test_proxy_closed_forms_match_enumeration(weights, inv_c):
    c = F(1, inv_c)
    m = len(weights)
    for base in (AdditiveValuation(weights), UnitDemandValuation(weights)):
        pv = ProxyValuation(base, c)
        for mask in range(1 << m):
            assert pv._value(mask) == proxy_by_enumeration(base, mask, c)


def test_proxy_of_xos_and_coverage_matches_enumeration():
    rng = random.Random(5)
    xos = XOSValuation(4, [[rng.randint(0, 6) for _ in range(4)] for _ in range(3)])
    cov = CoverageValuation(
        [rng.randint(0, 5) for _ in range(5)],
        [[e for e in range(5) if rng.random() < 0.5] for _ in range(4)],
    )
    for v in (xos, cov):
        pv = ProxyValuation(v, F(1, 3))
        for mask in range(1 << 4):
            assert pv._value(mask) == proxy_by_enumeration(v, mask, F(1, 3))


def test_proxy_with_c_one_is_identity():
    rng = random.Random(9)
    table = {mask: rng.randint(0, 9) for mask in range(8)}
    table[0] = 0
    v = ExplicitValuation(3, table)
    pv = ProxyValuation(v, 1)
    for mask in range(8):
        assert pv._value(mask) == v._value(mask)


def test_proxy_requires_reciprocal_integer():
    with pytest.raises(ParameterError):
        ProxyValuation(AdditiveValuation([1]), F(2, 3))
    with pytest.raises(ParameterError):
        ProxyValuation(AdditiveValuation([1]), 0)


def test_proxy_enumeration_cap():
    v = XOSValuation(25, [[1] * 25])
    pv = ProxyValuation(v, F(1, 2), subset_cap=20)
    with pytest.raises(CapacityError):
        pv.value(ItemSet.full(25))


def test_proxy_dominates_scaled_value_exhaustive_small():
    rng = random.Random(3)
    table = {mask: rng.randint(0, 8) for mask in range(1 << 4)}
    table[0] = 0
    from proxyauction.generators import repair_monotone_subadditive

    v = ExplicitValuation(4, repair_monotone_subadditive({k: F(x) for k, x in table.items()}, 4))
    for inv_c in (1, 2, 3, 4):
        c = F(1, inv_c)
        pv = ProxyValuation(v, c)
        for mask in range(1 << 4):
            assert pv._value(mask) >= c * v._value(mask)


# -- demand queries ---------------------------------------------------------


def test_additive_demand_keeps_positive_margins():
    v = AdditiveValuation([3, 5])
    assert v.demand([4, 1]) == ItemSet.from_indices([1])
    assert v.demand([3, 5]) == EMPTY_SET  # zero margins are dropped


def test_zero_prices_take_everything_when_strictly_monotone():
    v = AdditiveValuation([3, 5])
    assert v.demand([0, 0]) == ItemSet.full(2)


def test_unit_demand_demand_frozen_example():
    # profits: {} 0, {0} 1/2, {1} 4/5, {0,1} 3/10 -> {1}
    v = UnitDemandValuation([2, 1])
    assert v.demand([F(3, 2), F(1, 5)]) == ItemSet.from_indices([1])


@given(weights_st, st.data())
@settings(max_examples=40, deadline=None)
def test_demand_matches_full_scan(weights, data):
    m = len(weights)
    prices = data.draw(
        st.lists(
            st.fractions(min_value=0, max_value=10, max_denominator=4),
            min_size=m,
            max_size=m,
        )
    )
    for v in (AdditiveValuation(weights), UnitDemandValuation(weights)):
        assert v.demand(prices).mask == demand_by_scan(v, prices)


def test_proxy_demand_matches_scan():
    rng = random.Random(11)
    xos = XOSValuation(4, [[rng.randint(0, 6) for _ in range(4)] for _ in range(2)])
    pv = ProxyValuation(xos, F(1, 2))
    prices = [F(rng.randint(0, 3), 2) for _ in range(4)]
    assert pv.demand(prices).mask == demand_by_scan(pv, prices)
    pa = ProxyValuation(AdditiveValuation([3, 5, 1, 0]), F(1, 2))
    assert pa.demand(prices).mask == demand_by_scan(pa, prices)


def test_demand_scan_cap():
    v = XOSValuation(22, [[1] * 22])
    with pytest.raises(CapacityError):
        v.demand([0] * 22, scan_cap=20)


def test_demand_validates_prices():
    v = AdditiveValuation([1, 2])
    with pytest.raises(ParameterError):
        v.demand([1])
    with pytest.raises(ParameterError):
        v.demand([1, -1])


# -- structural checks -------------------------------------------------------


def test_builtin_kinds_are_subadditive_monotone_normalized():
    rng = random.Random(7)
    vals = [
        AdditiveValuation([rng.randint(0, 9) for _ in range(5)]),
        UnitDemandValuation([rng.randint(0, 9) for _ in range(5)]),
        XOSValuation(5, [[rng.randint(0, 9) for _ in range(5)] for _ in range(3)]),
        CoverageValuation(
            [rng.randint(0, 9) for _ in range(6)],
            [[e for e in range(6) if rng.random() < 0.5] for _ in range(5)],
        ),
    ]
    for v in vals:
        ok, witness = is_subadditive(v)
        assert ok, witness
        ok, witness = is_monotone_normalized(v)
        assert ok, witness


def test_builtin_kinds_pass_checks_at_the_ten_item_bound():
    rng = random.Random(17)
    vals = [
        AdditiveValuation([rng.randint(0, 9) for _ in range(10)]),
        CoverageValuation(
            [rng.randint(0, 9) for _ in range(12)],
            [[e for e in range(12) if rng.random() < 0.4] for _ in range(10)],
        ),
    ]
    for v in vals:
        assert is_subadditive(v)[0]
        assert is_monotone_normalized(v)[0]


def test_subadditivity_counterexample():
    v = ExplicitValuation(2, {0: 0, 1: 1, 2: 1, 3: 3})
    ok, witness = is_subadditive(v)
    assert not ok
    assert witness == (ItemSet(1), ItemSet(2))


def test_monotone_normalized_counterexamples():
    bad_empty = ExplicitValuation(2, {0: 1, 1: 1, 2: 1, 3: 1})
    ok, why = is_monotone_normalized(bad_empty)
    assert not ok and "empty" in why
    drops = ExplicitValuation(2, {0: 0, 1: 5, 2: 1, 3: 2})
    ok, why = is_monotone_normalized(drops)
    assert not ok


def test_check_caps():
    v = AdditiveValuation([1] * 12)
    with pytest.raises(CapacityError):
        is_subadditive(v, cap=10)


# -- counters and instances ---------------------------------------------------


def test_query_counters():
    v = AdditiveValuation([3, 5])
    v.value(S01)
    v.value(EMPTY_SET)
    v.demand([1, 1])
    pv = ProxyValuation(v, F(1, 2))
    pv.value(S01)
    pv.demand([1, 1])
    assert v.counter.value_queries == 2
    assert v.counter.demand_queries == 2  # raw + proxy demand share the bidder's tally
    assert v.counter.proxy_value_queries == 1


def test_instance_validation_and_totals():
    v1, v2 = AdditiveValuation([1, 2]), UnitDemandValuation([2, 2])
    inst = Instance(2, (v1, v2))
    assert inst.n == 2
    v1.value(S01)
    totals = inst.query_totals()
    assert totals["value_queries"] == 1
    with pytest.raises(ParameterError):
        Instance(3, (v1,))
    with pytest.raises(ParameterError):
        Instance(2, ())
