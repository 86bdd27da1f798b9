from fractions import Fraction

import pytest

from analysis import (
    RationalModel,
    _heavy_class,
    audit_e_sigma,
    audit_overlap,
    audit_run,
    build_e_star,
    case_two_constant,
    charge_to_neighborhood,
    enumerate_nash,
    implied_bound,
    pos_ratio,
)
from dynamics import CriticalEvent, EdgeOrigin, SigmaEvent, Trace, run
from game import State
from instance import build_instance, gen_poa_chain, gen_random_quasi_bipartite
from utils.errors import AuditFailure, CapExceededError


def _state(instance, routes):
    return State.from_paths(instance, {u: instance.walk(u, edges) for u, edges in routes.items()})


def _sigma_instance(sigma_cost):
    return build_instance(
        4,
        [(0, 1, 0, 10), (1, 2, 0, 11), (2, 1, 3, sigma_cost), (3, 2, 3, 5), (4, 3, 0, 256)],
        [0, 1, 2],
        0,
    )


@pytest.mark.parametrize("n", range(3, 9))
def test_poa_chain_gap_is_linear(n):
    delta = Fraction(1, 100)
    catalog = enumerate_nash(gen_poa_chain(n, Fraction(1, 2), delta))
    assert catalog.profiles == 2 ** n
    assert catalog.pos == 1
    assert catalog.poa == (n + n * delta) / (Fraction(3, 2) + n * delta)


def test_enumeration_cap(fig1):
    with pytest.raises(CapExceededError) as exc:
        enumerate_nash(fig1, profile_cap=10)
    assert exc.value.what == "profile count"


def test_pos_ratio_of_a_trivial_run(triangle):
    result = run(triangle)
    assert pos_ratio(result.final, result.opt.tree) == 1


def test_pos_ratio_rejects_non_equilibria(hub_pair, opt_for):
    opt = opt_for(hub_pair)
    final = _state(hub_pair, {1: [0, 1], 2: [4]})
    with pytest.raises(AuditFailure) as exc:
        pos_ratio(final, opt.tree)
    assert exc.value.check == "pos-ratio"


def test_sigma_backed_edge_is_charged_to_the_edge_below(opt_for):
    instance = _sigma_instance(4)
    opt = opt_for(instance)
    assert opt.tree.edges == frozenset({0, 2, 3})
    final = _state(instance, {1: [2, 4], 2: [3, 4]})
    trace = Trace(opt, guard=10)

    audit = audit_e_sigma(final, trace, opt)
    assert audit.members == (4,)
    assert audit.charges == {4: 2}
    assert audit.ratios == {4: 64}
    assert build_e_star(final, trace, opt, audit).edges == ()


def test_expensive_sigma_edge_stays_out_of_e_sigma(opt_for):
    instance = _sigma_instance(3)
    opt = opt_for(instance)
    final = _state(instance, {1: [2, 4], 2: [3, 4]})
    assert audit_e_sigma(final, Trace(opt, guard=10), opt).members == ()


def test_e_sigma_ratio_bounds_the_edge_cost_itself(opt_for):
    instance = build_instance(
        4,
        [(0, 1, 0, 10), (1, 2, 0, 11), (2, 1, 3, 4), (3, 2, 3, 5), (4, 3, 0, 300)],
        [0, 1, 2],
        0,
    )
    opt = opt_for(instance)
    final = _state(instance, {1: [2, 4], 2: [3, 4]})
    with pytest.raises(AuditFailure) as exc:
        audit_e_sigma(final, Trace(opt, guard=10), opt)
    assert exc.value.check == "e-sigma-ratio"


def _inflation_case(opt_for):
    instance = build_instance(4, [(0, 1, 0, 2), (1, 3, 0, 64), (2, 2, 3, 1), (3, 2, 0, 2)], [0, 1, 2], 0)
    opt = opt_for(instance)
    final = _state(instance, {1: [0], 2: [2, 1]})
    trace = Trace(opt, guard=10)
    trace.edge_origin = {2: EdgeOrigin("sigma", 0, 3)}
    return final, trace, opt


def test_sigma_edge_without_a_main_loop_takes_the_replaced_cost(opt_for):
    final, trace, opt = _inflation_case(opt_for)
    assert opt.tree.edges == frozenset({0, 3})
    trace.sigma_events = [SigmaEvent(0, 3, 2, 3, Fraction(40))]

    audit = audit_e_sigma(final, trace, opt)
    assert audit.members == (1,)
    assert audit.charges == {1: 2}
    assert audit.ratios == {1: 64}
    e_star = build_e_star(final, trace, opt, audit)
    assert e_star.edges == (2,)
    assert e_star.inflation == {2: 40}
    assert e_star.charge_cost(final.instance, 2) == 40


def test_sigma_inflation_needs_the_recorded_event(opt_for):
    final, trace, opt = _inflation_case(opt_for)
    audit = audit_e_sigma(final, trace, opt)
    with pytest.raises(AuditFailure) as exc:
        build_e_star(final, trace, opt, audit)
    assert exc.value.check == "sigma-context"


def test_critical_pair_drops_the_cheaper_edge(hub_pair, opt_for):
    opt = opt_for(hub_pair)
    final = _state(hub_pair, {1: [0, 1], 2: [4]})
    trace = Trace(opt, guard=10)
    trace.critical_events = [CriticalEvent(0, 1, 0, 1, 3)]
    trace.edge_origin = {0: EdgeOrigin("critical", 0, 1), 1: EdgeOrigin("critical", 0, 1)}

    audit = audit_e_sigma(final, trace, opt)
    assert audit.members == ()
    e_star = build_e_star(final, trace, opt, audit)
    assert e_star.edges == (1,)
    assert e_star.drops == {0: (1, "critical-pair")}
    assert e_star.inflation == {}

    verdicts = audit_overlap(final, opt, e_star)
    assert [(v.klass, v.edges, v.pairs_checked) for v in verdicts] == [(1, [1], 0)]

    ledger = charge_to_neighborhood(final, opt, e_star)
    assert ledger.totals == {4: 2304}
    assert ledger.cases == {4: "boundary"}
    assert 1280 + ledger.total == hub_pair.total_cost(final.edges - opt.tree.edges)


def test_unpaired_critical_edges_are_not_dropped(hub_pair, opt_for):
    opt = opt_for(hub_pair)
    final = _state(hub_pair, {1: [0, 1], 2: [4]})
    trace = Trace(opt, guard=10)
    trace.critical_events = [CriticalEvent(0, 1, 0, 1, 3)]
    trace.edge_origin = {0: EdgeOrigin("critical", 0, 1), 1: EdgeOrigin("critical", 5, 1)}
    e_star = build_e_star(final, trace, opt, audit_e_sigma(final, trace, opt))
    assert e_star.edges == (0, 1)
    assert e_star.drops == {}


def test_case_two_constant_bounds():
    k = case_two_constant()
    assert Fraction(302, 10) * 10 ** 12 <= k <= Fraction(304, 10) * 10 ** 12
    assert k >= 2 * (Fraction(256) ** 5 + Fraction(256) ** 6 / 21)
    assert implied_bound() == 65 * (1 + 3 * (2 * 256 ** 3 + k + 2))


def test_heavy_class_skips_the_lightest_class():
    assert _heavy_class({0: 1000}, 2) is None
    assert _heavy_class({0: 1000, 1: 1}, 3) == 1
    assert _heavy_class({1: 1}, 3) == 1


def test_rational_model():
    model = RationalModel.of(Fraction(7, 6))
    assert (model.num, model.den) == (7, 6)
    assert str(model) == "7/6"
    assert model.to_fraction() == Fraction(7, 6)
    assert str(RationalModel.of(Fraction(4))) == "4"


def test_audit_of_the_hub_chain(fig1):
    report = audit_run(run(fig1), name="fig1", seed=0)
    assert report.audit_pass
    assert report.pos_ratio.to_fraction() == 1
    assert report.opt_cost.to_fraction() == Fraction(154, 100)
    assert report.e_sigma == [] and report.e_star == []
    assert report.charge_ledger == {}


@pytest.mark.parametrize("seed", range(30))
def test_random_batch_passes_the_audit(seed):
    result = run(gen_random_quasi_bipartite(6, 4, 0.4, seed=seed))
    report = audit_run(result, name=f"qb-{seed}", seed=seed)
    assert report.audit_pass and report.conservation and report.bound_respected
    assert report.pos_ratio.to_fraction() >= 1
    assert report.moves == result.trace.moves
