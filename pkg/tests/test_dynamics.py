import logging
from fractions import Fraction

import pytest

from config import RunConfig
from dynamics import (
    MainLoopRun,
    SigmaEvent,
    SigmaExemption,
    Trace,
    _after_critical,
    _check_absorb_precondition,
    homogenize,
    is_path_homogeneous,
    main_loop,
    neighborhood,
    run,
    z_set,
)
from game import Move, MoveKind, State, Switch, apply_move, find_scheduled_move, initial_state, plan_move
from instance import build_instance, gen_random_quasi_bipartite
from steiner import build_opt_structures
from steiner_solvers import tree_from_edges
from utils.errors import GuardExceededError, LemmaViolation


def _state(instance, routes):
    return State.from_paths(instance, {u: instance.walk(u, edges) for u, edges in routes.items()})


def test_run_from_an_equilibrium_makes_no_moves(triangle):
    result = run(triangle)
    assert result.trace.moves == 0
    assert result.verdict.is_nash
    assert result.final.cost == result.opt.tree.total_cost == 4
    assert result.trace.initial_potential == Fraction(11, 2)


def test_run_normalizes_costs(fig1):
    result = run(fig1)
    assert result.scale == 100
    assert result.opt.tree.total_cost == 154
    assert result.trace.moves == 0


def test_guard_stops_the_run(chain, opt_for):
    opt = opt_for(chain)
    trace = Trace(opt, guard=1)
    state = _state(chain, {1: [0], 2: [3], 3: [4]})
    trace.start(state)

    first, _ = plan_move(state, [(3, chain.walk(3, [2, 3]))])
    state = apply_move(state, first, trace)
    assert trace.records[0].added == (2,)
    assert trace.edge_origin[2].kind == "tree"

    second, _ = plan_move(state, [(2, chain.walk(2, [1, 0]))])
    with pytest.raises(GuardExceededError) as exc:
        apply_move(state, second, trace)
    assert exc.value.guard == 1


def test_trace_check_raises_with_snapshot(triangle, opt_for):
    opt = opt_for(triangle)
    trace = Trace(opt, guard=10)
    state = initial_state(opt)
    with pytest.raises(LemmaViolation) as exc:
        trace.check("demo", False, "detail", state)
    assert exc.value.check == "demo"
    assert exc.value.snapshot["paths"] == {"1": [0], "2": [1, 0]}
    assert trace.checks[("demo", False)] == 1


def test_homogenize_reroutes_the_expensive_end(opt_for):
    instance = build_instance(3, [(0, 1, 0, 1), (1, 2, 1, 1), (2, 2, 0, 10 ** 6)], [0, 1, 2], 0)
    opt = opt_for(instance)
    state = _state(instance, {1: [0], 2: [2]})
    assert not is_path_homogeneous(state, 1, 2, opt)

    trace = Trace(opt, guard=10)
    after = homogenize(state, opt.tree_path(2, 1), opt, trace)
    assert after.paths[2].edges == (1, 0)
    assert after.potential == Fraction(5, 2)
    assert trace.records[0].tags == ("homogenize:2-1:1",)
    assert is_path_homogeneous(after, 1, 2, opt)


def test_homogenize_records_every_switch_of_the_prefix(opt_for):
    instance = build_instance(
        4, [(0, 1, 0, 1), (1, 2, 1, 1), (2, 2, 0, 10 ** 6), (3, 3, 2, 1)], [0, 1, 2, 3], 0
    )
    opt = opt_for(instance)
    state = _state(instance, {1: [0], 2: [2], 3: [3, 2]})

    trace = Trace(opt, guard=10)
    after = homogenize(state, opt.tree_path(2, 1), opt, trace)
    assert [(r.mover, r.delta) for r in trace.records] == [
        (2, Fraction(-999997, 2)),
        (3, Fraction(-5999995, 6)),
    ]
    assert all(r.tags == ("homogenize:2-1:1",) for r in trace.records)
    assert after.paths[3].edges == (3, 1, 0)
    assert after.potential == Fraction(13, 3)


def test_homogenize_without_an_improving_prefix(triangle, opt_for):
    opt = opt_for(triangle)
    state = initial_state(opt)
    with pytest.raises(LemmaViolation) as exc:
        homogenize(state, opt.tree_path(2, 1), opt)
    assert exc.value.check == "homogenize-no-prefix"


def test_satellite_free_neighborhood(hub_pair, opt_for):
    opt = opt_for(hub_pair)
    state = _state(hub_pair, {1: [0, 1], 2: [4]})
    assert z_set(state, opt) == frozenset({3})
    nb = neighborhood(state, 3, opt)
    assert nb.edge == 1
    assert nb.low == 256
    assert nb.anchor == 2
    assert nb.interval_vertices == (2,)
    assert nb.satellites == ()


def test_both_absorb_orders_finish(monkeypatch):
    instance = gen_random_quasi_bipartite(6, 4, 0.4, seed=11)
    from_root = run(instance, RunConfig(absorb_order="from-r"))
    assert from_root.verdict.is_nash
    monkeypatch.setenv("MCAST_POS_ABSORB_ORDER", "from-v")
    config = RunConfig.from_env()
    assert config.absorb_order == "from-v"
    assert run(instance, config).verdict.is_nash


@pytest.mark.parametrize("seed", range(30))
def test_random_runs_reach_an_equilibrium(seed):
    instance = gen_random_quasi_bipartite(6, 4, 0.4, seed=seed)
    result = run(instance)
    assert result.verdict.is_nash
    assert result.final.tree_flag
    assert all(record.delta < 0 for record in result.trace.records)
    assert result.final.cost >= result.opt.tree.total_cost
    assert result.trace.checks[("strict-decrease", True)] == result.trace.moves


def _loop_trace(opt, state):
    trace = Trace(opt, guard=100)
    trace.start(state)
    return trace


def _steps(trace, start=0):
    return [(r.tags, r.delta) for r in trace.records[start:]]


def test_critical_edge_absorbs_its_neighborhood():
    instance = build_instance(
        5, [(0, 1, 0, 256 ** 3), (1, 1, 2, 1), (2, 2, 3, 1), (3, 3, 4, 1), (4, 4, 0, 2 * 256 ** 2)], range(5), 0
    )
    opt = build_opt_structures(instance, tree_from_edges(instance, [0, 1, 2, 3]))
    state = initial_state(opt)
    trace = _loop_trace(opt, state)

    move = find_scheduled_move(state, opt)
    assert move.kind is MoveKind.CRITICAL
    assert (move.mover, move.e_a, move.e_b) == (4, 4, None)
    assert move.delta == Fraction(-24379403, 6)
    state = apply_move(state, move, trace)

    state = main_loop(state, opt, trace, RunConfig(), v=4, e_v=4)
    assert trace.main_loop_runs == [MainLoopRun(1, 4, 4, None)]
    assert _steps(trace, 1) == [
        (("absorb-tree:4<-3",), Fraction(-33161219, 6)),
        (("absorb-tree:4<-2",), Fraction(-50069501, 6)),
    ]
    assert {u: p.edges for u, p in state.paths.items()} == {1: (0,), 2: (2, 3, 4), 3: (3, 4), 4: (4,)}
    assert trace.checks[("absorb-improving", True)] == 2
    assert trace.annotations == []


def test_critical_edge_is_deleted_when_a_tree_neighbor_is_cheaper(opt_for):
    instance = build_instance(
        5, [(0, 1, 0, 256), (1, 1, 2, 1), (2, 2, 3, 1), (3, 3, 4, 1), (4, 4, 0, 131072)], range(5), 0
    )
    opt = opt_for(instance)
    state = _state(instance, {1: [0], 2: [1, 0], 3: [2, 1, 0], 4: [4]})
    trace = _loop_trace(opt, state)

    state = main_loop(state, opt, trace, RunConfig(), v=4, e_v=4)
    assert _steps(trace) == [(("delete:4-3",), Fraction(-786037, 6))]
    assert trace.records[0].removed == (4,)
    assert state.paths[4].edges == (3, 2, 1, 0)


def test_uv_gap_is_closed_before_the_nonterminal_edge_is_deleted(opt_for):
    instance = build_instance(
        5,
        [(0, 3, 0, 2), (1, 1, 3, 1), (2, 2, 1, 1), (3, 2, 0, 100), (4, 1, 4, 1), (5, 4, 0, 131072)],
        [0, 1, 2, 3],
        0,
    )
    opt = opt_for(instance)
    assert opt.tree.edges == frozenset({0, 1, 2})
    state = _state(instance, {1: [4, 5], 2: [3], 3: [0]})
    trace = _loop_trace(opt, state)

    state = main_loop(state, opt, trace, RunConfig(), v=4, e_v=5, u_v=1)
    assert _steps(trace) == [
        (("uv-gap:2",), Fraction(-97)),
        (("delete:1-3",), Fraction(-786431, 6)),
    ]
    assert {u: p.edges for u, p in state.paths.items()} == {1: (1, 0), 2: (2, 1, 0), 3: (0,)}


def test_satellite_gap_moves_the_satellite_onto_its_sigma_edge(opt_for):
    instance = build_instance(
        6,
        [
            (0, 1, 0, 256), (1, 1, 2, 1), (2, 2, 3, 1), (3, 3, 4, 1),
            (4, 4, 0, 131072), (5, 5, 2, 1), (6, 5, 0, 300), (7, 5, 3, 2),
        ],
        [0, 1, 2, 3, 4],
        0,
    )
    opt = opt_for(instance)
    state = _state(instance, {1: [0], 2: [1, 0], 3: [7, 6], 4: [4]})
    assert z_set(state, opt) == frozenset({5})
    assert neighborhood(state, 4, opt).satellites == (5,)
    trace = _loop_trace(opt, state)

    state = main_loop(state, opt, trace, RunConfig(), v=4, e_v=4)
    assert _steps(trace) == [
        (("sigma-gap:5", "sigma:5"), Fraction(-1279, 6)),
        (("delete:4-3",), Fraction(-786031, 6)),
    ]
    assert trace.sigma_events == [SigmaEvent(0, 5, 5, 6, Fraction(300))]
    assert state.paths[3].edges == (7, 5, 1, 0)


def _expensive_hop(sigma_cost):
    """Nonterminal 3 sits off T* between terminal 1 and the root."""
    instance = build_instance(
        4, [(0, 1, 0, 1), (1, 2, 0, 1), (2, 1, 3, sigma_cost), (3, 3, 0, 131072)], [0, 1, 2], 0
    )
    opt = build_opt_structures(instance, tree_from_edges(instance, [0, 1]))
    state = _state(instance, {1: [2, 3], 2: [1]})
    return state, opt, neighborhood(state, 3, opt, 3)


def test_absorb_floor_is_waived_for_edges_charged_through_e_sigma():
    state, opt, nb = _expensive_hop(2000)
    trace = _loop_trace(opt, state)
    _check_absorb_precondition(state, nb, opt, trace, 3, 1)
    assert {e.member for e in trace.sigma_exemptions} == {0, 2}
    assert SigmaExemption(0, 3, 3, 0, Fraction(0), Fraction(786432, 7), Fraction(2000)) in trace.sigma_exemptions


def test_absorb_floor_is_enforced_when_the_sigma_edge_is_cheap():
    state, opt, nb = _expensive_hop(1000)
    trace = _loop_trace(opt, state)
    with pytest.raises(LemmaViolation) as exc:
        _check_absorb_precondition(state, nb, opt, trace, 3, 1)
    assert exc.value.check == "absorb-precondition"
    assert trace.sigma_exemptions == []


def _shared_critical(instance, tag=""):
    old, new = instance.walk(1, [4]), instance.walk(1, [0, 1])
    return Move(MoveKind.CRITICAL, (Switch(1, old, new),), Fraction(0), Fraction(0),
                new_edges=(0, 1), e_a=0, e_b=1, tag=tag)


@pytest.fixture
def fan(opt_for):
    instance = build_instance(
        5, [(0, 1, 4, 1), (1, 4, 0, 10), (2, 2, 4, 1), (3, 3, 1, 1), (4, 1, 0, 5), (5, 2, 0, 5)], [0, 1, 2, 3], 0
    )
    opt = opt_for(instance)
    state = _state(instance, {1: [0, 1], 2: [2, 1], 3: [3, 0, 1]})
    return instance, opt, state


def test_shared_critical_edges_skip_the_main_loop_with_a_warning(fan, caplog):
    instance, opt, state = fan
    trace = Trace(opt, guard=10)
    with caplog.at_level(logging.WARNING):
        after = _after_critical(state, _shared_critical(instance), opt, trace, RunConfig())
    assert after is state
    assert trace.main_loop_runs == []
    assert trace.annotations == [
        "main-loop-skipped edge 1 no longer used by 1 alone",
        "main-loop-skipped edge 0 is shared",
    ]
    assert sum("Skipping main loop" in r.getMessage() for r in caplog.records) == 2


def test_irregular_critical_moves_skip_the_main_loop_with_a_warning(fan, caplog):
    instance, opt, state = fan
    trace = Trace(opt, guard=10)
    with caplog.at_level(logging.WARNING):
        _after_critical(state, _shared_critical(instance, tag="irregular"), opt, trace, RunConfig())
    assert trace.annotations == ["irregular-critical mover=1 new=[0, 1]"]
    assert any("Irregular critical move" in r.getMessage() for r in caplog.records)
