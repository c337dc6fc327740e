from fractions import Fraction as F

import pytest

from oracles import integral_welfare_by_products
from proxyauction.generators import generate, overlap_demo
from proxyauction.itemsets import EMPTY_SET, ItemSet
from proxyauction.lp import FractionalSolution, build_full_lp, solve_exact
from proxyauction.mechanism import MechanismConfig, Pipeline, Q_HALT, Q_OWN_ITEMS
from proxyauction.valuations import AdditiveValuation, ExplicitValuation, Instance
from proxyauction.verify import (
    check_approximation,
    check_halt_frequency,
    check_keep_marginals,
    check_lp_agreement,
    check_monte_carlo,
    check_proxy_bound,
    check_truthfulness,
    check_welfare_identity,
    exact_distribution,
    expected_true_value,
    misreport_family,
    optimal_integral_welfare,
)


def overlap_configs():
    halt = MechanismConfig(c=F(1), p=F(1, 20), q_variant=Q_HALT)
    own = MechanismConfig(c=F(1), p=F(1, 20), q_variant=Q_OWN_ITEMS)
    return halt, own


# -- the exact law -------------------------------------------------------------


def test_single_bidder_distribution():
    inst = Instance(2, (AdditiveValuation([3, 5]),))
    config = MechanismConfig(c=F(1), p=F(1, 2))
    dist = exact_distribution(inst, config)
    assert dist.expected_welfare == F(8, 2)
    assert len(dist.atoms) == 1 and not dist.atoms[0].halted


def test_empty_solution_distribution():
    inst = Instance(2, (AdditiveValuation([0, 0]),))
    config = MechanismConfig(c=F(1, 2), p=F(1, 20))
    dist = exact_distribution(inst, config)
    assert dist.expected_welfare == 0
    assert dist.entries == ()


def test_overlap_demo_hand_enumerated_law():
    """Full eight-atom law for the three-bidder overlap construction.

    Supports: bidder 0 holds {0} w.p. 1/2, bidders 1 and 2 hold {1} w.p. 1/2
    each. At c = 1 a run halts exactly when bidders 1 and 2 collide on item 1,
    so two of the eight equiprobable atoms halt.
    """
    inst, sol = overlap_demo()
    halt_cfg, own_cfg = overlap_configs()
    p = halt_cfg.p

    dist = exact_distribution(inst, halt_cfg, solution=sol)
    assert len(dist.atoms) == 8
    assert all(atom.probability == F(1, 8) for atom in dist.atoms)
    assert sum(a.probability for a in dist.atoms if a.halted) == F(1, 4)
    for atom in dist.atoms:
        should_halt = atom.bundles[1] == ItemSet(2) and atom.bundles[2] == ItemSet(2)
        assert atom.halted == should_halt

    by_key = {(e.bidder, e.bundle.mask): e for e in dist.entries}
    e0 = by_key[(0, 1)]
    assert (e0.q, e0.survival, e0.marginal) == (F(1, 4), p / F(3, 4), p / 2)
    e1 = by_key[(1, 2)]
    assert (e1.q, e1.survival, e1.marginal) == (F(1, 2), 2 * p, p / 2)
    e2 = by_key[(2, 2)]
    assert (e2.q, e2.survival, e2.marginal) == (F(1, 2), 2 * p, p / 2)
    # welfare: p/2 * (v0({0}) + v1({1}) + v2({1})) = p/2 * (2 + 4 + 5)
    assert dist.expected_welfare == F(11, 40)
    assert dist.expected_welfare == p * sol.objective

    own = exact_distribution(inst, own_cfg, solution=sol)
    assert own.expected_welfare == F(21, 80)
    o0 = {(e.bidder, e.bundle.mask): e for e in own.entries}[(0, 1)]
    assert o0.q == 0 and o0.marginal == F(3, 8) * p
    assert p * o0.x - o0.marginal == F(1, 160)  # the exact own-items deficit


def test_identities_on_corpus_spot(corpus):
    for item in (corpus[5], corpus[13], corpus[22]):
        assert check_welfare_identity(item.instance, item.config).passed
        assert check_keep_marginals(item.instance, item.config).passed


def test_own_items_variant_reports_without_asserting():
    inst, sol = overlap_demo()
    _, own_cfg = overlap_configs()
    w = check_welfare_identity(inst, own_cfg, solution=sol)
    assert w.passed  # informational under own-items
    assert F(w.details["gap"]) == F(11, 40) - F(21, 80)
    m = check_keep_marginals(inst, own_cfg, solution=sol)
    assert m.passed
    assert len(m.details["deficits"]) == 1
    assert F(m.details["deficits"][0]["deficit"]) == F(1, 160)


# -- integral optimum and the approximation bound --------------------------------


def test_integral_optimum_examples():
    single = Instance(2, (AdditiveValuation([3, 5]),))
    assert optimal_integral_welfare(single) == 8
    two = Instance(2, (AdditiveValuation([3, 1]), AdditiveValuation([1, 5])))
    assert optimal_integral_welfare(two) == 8
    lp_opt = solve_exact(build_full_lp(two)).objective
    assert optimal_integral_welfare(two) == lp_opt  # additive LP is integral


def test_integral_optimum_matches_oracle():
    for seed in (0, 3, 8):
        inst = generate("mixed", 2, 3, seed)
        assert optimal_integral_welfare(inst) == integral_welfare_by_products(inst)


def test_integral_optimum_cap():
    from proxyauction.errors import CapacityError

    inst = generate("additive", 3, 4, 0)
    with pytest.raises(CapacityError):
        optimal_integral_welfare(inst, cap=10)


def test_approximation_equality_for_single_bidder_extreme_params():
    inst = Instance(2, (AdditiveValuation([3, 5]),))
    config = MechanismConfig(c=F(1), p=F(1))
    res = check_approximation(inst, config)
    assert res.passed
    assert res.details["expected_welfare"] == res.details["c_p_opt"] == "8"


def test_approximation_tight_for_additive_without_halts():
    inst = Instance(3, (AdditiveValuation([3, 0, 2]), AdditiveValuation([0, 4, 1])))
    config = MechanismConfig(c=F(1, 2), p=F(1, 20))
    res = check_approximation(inst, config)
    assert res.passed
    assert res.details["expected_welfare"] == res.details["c_p_opt"]


def test_approximation_on_corpus_spot(corpus):
    for item in corpus[:4]:
        assert check_approximation(item.instance, item.config).passed


# -- proxy bound ------------------------------------------------------------------


def test_proxy_bound_check(corpus):
    res = check_proxy_bound(corpus[13].instance)
    assert res.passed


def test_proxy_bound_flags_subadditivity_violations():
    # a complement-style table: the bound needs subadditivity and fails here
    v = ExplicitValuation(2, {0: 0, 1: 0, 2: 0, 3: 10})
    res = check_proxy_bound(Instance(2, (v,)), cs=(F(1, 2),))
    assert not res.passed
    assert res.witness["bundle"] == [0, 1]


# -- halting frequency ---------------------------------------------------------------


def test_halt_frequency_zero_for_disjoint_supports():
    inst = Instance(2, (AdditiveValuation([3, 0]), AdditiveValuation([0, 5])))
    config = MechanismConfig(c=F(1, 2), p=F(1, 20))
    res = check_halt_frequency(inst, config, trials=400)
    assert res.passed and res.details["halts"] == 0


def test_halt_frequency_impossible_when_inv_c_at_least_n():
    inst = generate("xos", 3, 4, 1)
    config = MechanismConfig(c=F(1, 3), p=F(1, 20))  # 1/c = 3 = n
    res = check_halt_frequency(inst, config, trials=400)
    assert res.details["halts"] == 0


def test_halt_frequency_matches_exact_probability():
    inst, sol = overlap_demo()
    halt_cfg, _ = overlap_configs()
    trials = 10_000
    res = check_halt_frequency(inst, halt_cfg, trials, solution=sol, seed=17)
    freq = res.details["halts"] / trials
    assert abs(freq - 0.25) <= 3 * (0.25 * 0.75 / trials) ** 0.5


# -- truthfulness ----------------------------------------------------------------------


def test_misreport_family_shapes():
    v = ExplicitValuation(2, {0: 0, 1: 2, 2: 3, 3: 4})
    labels = [label for label, _ in misreport_family(v)]
    assert "scale-1/2" in labels and "scale-2" in labels
    assert "swap-additive" in labels and "swap-unit-demand" in labels
    assert sum(1 for l in labels if l.startswith("bump+")) == 3
    add = AdditiveValuation([1, 2])
    add_labels = [label for label, _ in misreport_family(add)]
    assert "swap-additive" not in add_labels and "swap-unit-demand" in add_labels


def test_single_bidder_truthfulness():
    inst = Instance(2, (AdditiveValuation([3, 5]),))
    config = MechanismConfig(c=F(1, 2), p=F(1, 20))
    res = check_truthfulness(inst, config)
    assert res.passed


def test_expected_value_marginal_consistency(corpus):
    item = corpus[22]
    pipe = Pipeline(item.instance, item.config)
    dist = exact_distribution(item.instance, item.config, pipeline=pipe)
    total = sum(
        (expected_true_value(dist, i, pipe.proxies[i]) for i in range(item.instance.n)),
        F(0),
    )
    assert total == dist.expected_welfare


def test_truthfulness_on_explicit_instance(truthful_corpus):
    item = truthful_corpus[0]
    res = check_truthfulness(item.instance, item.config)
    assert res.passed, res.witness
    assert res.details["misreports_checked"] > 0


def test_truthfulness_under_own_items_is_recorded_not_asserted():
    inst = generate("explicit-subadditive", 2, 2, 5)
    config = MechanismConfig(c=F(1, 2), p=F(1, 20), q_variant=Q_OWN_ITEMS)
    res = check_truthfulness(inst, config)
    assert isinstance(res.passed, bool)  # outcome recorded either way


# -- composite checks ---------------------------------------------------------------------


def test_lp_agreement_small():
    inst = generate("unit-demand", 2, 3, 4)
    config = MechanismConfig(c=F(1, 2), p=F(1, 20))
    res = check_lp_agreement(inst, config)
    assert res.passed
    assert "vertex_enumeration_objective" in res.details


def test_monte_carlo_check(corpus):
    item = corpus[12]
    res = check_monte_carlo(item.instance, item.config, trials=2_000)
    assert res.passed


def test_identities_hold_under_column_generation_solver(corpus):
    from dataclasses import replace

    for item in (corpus[1], corpus[13], corpus[22]):
        cfg = replace(item.config, solver="column-generation")
        assert check_welfare_identity(item.instance, cfg).passed, item.label
        assert check_keep_marginals(item.instance, cfg).passed, item.label


def test_truthfulness_holds_under_column_generation_solver(truthful_corpus):
    from dataclasses import replace

    item = truthful_corpus[0]
    cfg = replace(item.config, solver="column-generation")
    res = check_truthfulness(item.instance, cfg)
    assert res.passed, res.witness


def test_distribution_rejects_float_mode():
    from proxyauction.errors import ParameterError

    inst = Instance(2, (AdditiveValuation([3, 5]),))
    config = MechanismConfig(c=F(1, 2), p=F(1, 20), arithmetic="float")
    with pytest.raises(ParameterError):
        exact_distribution(inst, config)
