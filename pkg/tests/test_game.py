from collections import Counter
from fractions import Fraction

import pytest

from game import (
    MoveKind,
    State,
    _critical_move,
    apply_move,
    best_response,
    cleanup_unused,
    find_scheduled_move,
    initial_state,
    is_nash,
    make_tree,
    plan_move,
    sandwich_holds,
    vertex_move_changes,
)
from instance import Path, build_instance
from steiner import build_opt_structures
from steiner_solvers import tree_from_edges
from utils.errors import InvalidPathError, LemmaViolation, NonImprovingMoveError, NotATreeError, UndefinedCostError


def _state(instance, routes):
    return State.from_paths(instance, {u: instance.walk(u, edges) for u, edges in routes.items()})


def test_initial_state_follows_the_optimal_tree(triangle, opt_for):
    state = initial_state(opt_for(triangle))
    assert state.paths[2] == Path((2, 1, 0), (1, 0))
    assert state.cost == 4
    assert state.potential == Fraction(11, 2)
    assert sandwich_holds(state)
    assert state.tree_flag


def test_from_paths_rejects_bad_strategies(triangle):
    with pytest.raises(InvalidPathError):
        State.from_paths(triangle, {1: triangle.walk(1, [0])})
    with pytest.raises(InvalidPathError):
        State.from_paths(triangle, {1: triangle.walk(1, [0]), 2: Path((2, 1), (1,))})


def test_nash_witness(triangle):
    state = _state(triangle, {1: [0], 2: [2]})
    assert state.potential == 7
    verdict = is_nash(state)
    assert not verdict
    assert verdict.terminal == 2
    assert verdict.path == Path((2, 1, 0), (1, 0))
    assert verdict.current_cost == 4
    assert verdict.deviation_cost == Fraction(5, 2)


def test_scheduler_prefers_safe_moves(triangle, opt_for):
    state = _state(triangle, {1: [0], 2: [2]})
    move = find_scheduled_move(state, opt_for(triangle))
    assert move.kind is MoveKind.SAFE
    assert move.mover == 2
    assert move.delta == Fraction(-3, 2)
    after = apply_move(state, move)
    assert after.potential == Fraction(11, 2)
    assert is_nash(after)


def test_player_costs_on_the_broadcast_chain(chain, opt_for):
    opt = opt_for(chain)
    state = initial_state(opt)
    assert [state.player_cost(u) for u in (1, 2, 3)] == [Fraction(2, 3), Fraction(7, 6), Fraction(13, 6)]
    assert is_nash(state)
    assert find_scheduled_move(state, opt) is None
    response = best_response(state, 3)
    assert response.path == Path((3, 2, 1, 0), (2, 1, 0))
    assert response.cost == Fraction(13, 6)


def test_best_response_respects_allowed_edges(chain, opt_for):
    state = initial_state(opt_for(chain))
    response = best_response(state, 3, allowed=frozenset({4}))
    assert response.path == Path((3, 0), (4,))
    assert response.cost == 8


def test_switch_keeps_potential_identity(chain, opt_for):
    state = initial_state(opt_for(chain))
    after = state.switch(3, chain.walk(3, [4]))
    assert after.potential - state.potential == after.player_cost(3) - state.player_cost(3)
    assert after.usage[2] == 0 and 2 not in after.edges


def test_vertex_cost_requires_a_common_suffix(hub_pair):
    shared = _state(hub_pair, {1: [0, 1], 2: [2, 1]})
    assert shared.vertex_cost(3) == 1152
    split = _state(hub_pair, {1: [0, 1], 2: [2, 0, 3]})
    assert split.defined_cost(3) is None
    with pytest.raises(UndefinedCostError):
        split.vertex_cost(3)
    assert split.vertex_cost(0) == 0


def test_vertex_move_changes_reroutes_everyone_through_the_vertex(chain, opt_for):
    state = initial_state(opt_for(chain))
    changes = vertex_move_changes(state, 2, Path((2, 0), (3,)))
    assert changes == [(2, Path((2, 0), (3,))), (3, Path((3, 2, 0), (2, 3)))]
    assert vertex_move_changes(state, 2, Path((2, 0), (3,)), protected=frozenset({2, 3})) == []


def test_apply_move_rejects_non_improving_and_stale_moves(chain, opt_for):
    state = initial_state(opt_for(chain))
    worse, _ = plan_move(state, [(1, chain.walk(1, [1, 3]))])
    with pytest.raises(NonImprovingMoveError):
        apply_move(state, worse)

    other = state.switch(3, chain.walk(3, [4]))
    with pytest.raises(LemmaViolation) as exc:
        apply_move(other, worse)
    assert exc.value.check == "stale-move"


def test_make_tree_merges_diverging_suffixes(chain):
    state = _state(chain, {1: [0], 2: [3], 3: [2, 1, 0]})
    assert state.potential == 11
    assert not state.is_tree()
    merged = make_tree(state)
    assert merged.is_tree()
    assert merged.paths[2] == Path((2, 1, 0), (1, 0))
    assert merged.potential == Fraction(37, 6)
    assert merged.edges <= state.edges


def test_scheduler_needs_a_tree(chain, opt_for):
    state = _state(chain, {1: [0], 2: [3], 3: [2, 1, 0]})
    with pytest.raises(NotATreeError):
        find_scheduled_move(state, opt_for(chain))


def test_cleanup_unused_recounts_usage(chain, opt_for):
    state = initial_state(opt_for(chain))
    stale = State(chain, state.paths, usage=state.usage + Counter({4: 1}))
    assert 4 in stale.edges
    cleaned = cleanup_unused(stale)
    assert cleaned.edges == frozenset({0, 1, 2})
    assert cleaned.potential == state.potential


@pytest.fixture
def spur():
    """Terminal 1 hangs off the root by an expensive edge; nonterminal 3 already carries player 2."""
    instance = build_instance(4, [(0, 1, 0, 100), (1, 2, 3, 1), (2, 3, 0, 10), (3, 1, 3, 1), (4, 3, 0, 1)], [0, 1, 2], 0)
    opt = build_opt_structures(instance, tree_from_edges(instance, [0, 1, 2]))
    return instance, opt, _state(instance, {1: [0], 2: [1, 2]})


def test_second_new_edge_needs_an_unused_nonterminal(spur):
    instance, opt, state = spur
    move = find_scheduled_move(state, opt)
    assert move.kind is MoveKind.CRITICAL
    assert move.mover == 1
    assert move.new_path == Path((1, 3, 0), (3, 2))
    assert (move.e_a, move.e_b) == (3, None)
    assert move.critical_vertex is None
    assert move.delta == -94


def test_critical_move_must_start_with_a_new_edge(spur):
    _, _, state = spur
    with pytest.raises(LemmaViolation) as exc:
        _critical_move(state, 2, Path((2, 3, 0), (1, 4)), Fraction(9), (4,))
    assert exc.value.check == "critical-shape"
    move = _critical_move(state, 2, Path((2, 3, 0), (1, 4)), Fraction(9), (4,), tag="irregular")
    assert move.e_a is None and move.e_b == 4
