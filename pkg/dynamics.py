"""Scheduled potential-reducing dynamics from the optimal tree to an equilibrium.

The outer loop applies safe and critical moves; every edge a critical move
introduces gets a main loop that repairs the neighborhood around it, tries
to delete the edge and otherwise lets its vertex absorb the neighborhood.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, List, Optional, Tuple

from config import RunConfig
from game import (
    Move,
    MoveKind,
    NashVerdict,
    State,
    apply_move,
    find_scheduled_move,
    initial_state,
    is_nash,
    make_tree,
    plan_move,
    sandwich_holds,
    vertex_move_changes,
)
from instance import Instance, Path, edge_class, normalize_costs, prune_heavy_edges
from steiner import (
    Interval,
    OptStructures,
    build_opt_structures,
    exact_steiner,
    interval,
    interval_vertices,
    side_cost,
)
from utils.errors import GuardExceededError, LemmaViolation, McastError
from utils.log_setup import ASSERTIONS_LOGGER, MOVES_LOGGER
from utils.rational import format_rational

logger = logging.getLogger(__name__)
moves_logger = logging.getLogger(MOVES_LOGGER)
assertions_logger = logging.getLogger(ASSERTIONS_LOGGER)

NEIGHBORHOOD_DIVISOR = 56
SATELLITE_DIVISOR = 64
HOMOGENEOUS_SPREAD = Fraction(23, 112)
ABSORB_SLACK = Fraction(2, 7)


@dataclass(frozen=True)
class MoveRecord:
    index: int
    kind: str
    mover: int
    delta: Fraction
    added: Tuple[int, ...]
    removed: Tuple[int, ...]
    tags: Tuple[str, ...]
    move: Move


@dataclass(frozen=True)
class CriticalEvent:
    index: int
    mover: int
    e_a: Optional[int]
    e_b: Optional[int]
    vertex: Optional[int]
    tag: str = ""


@dataclass(frozen=True)
class SigmaEvent:
    """A sigma edge entered the state outside a critical move."""

    index: int
    vertex: int
    sigma_edge: int
    prior_edge: Optional[int]
    prior_cost: Optional[Fraction]


@dataclass(frozen=True)
class SigmaExemption:
    """A member below the absorb floor next to an edge charged through E_sigma."""

    index: int
    vertex: int
    edge: int
    member: int
    member_cost: Fraction
    floor: Fraction
    sigma_cost: Fraction


@dataclass(frozen=True)
class MainLoopRun:
    index: int
    vertex: int
    edge: int
    u_v: Optional[int]


@dataclass(frozen=True)
class EdgeOrigin:
    kind: str
    index: int
    mover: Optional[int] = None


class Trace:
    """Ordered record of a run plus the bookkeeping the audit replays."""

    def __init__(self, opt: OptStructures, guard: int):
        self.opt = opt
        self.guard = guard
        self.records: List[MoveRecord] = []
        self.critical_events: List[CriticalEvent] = []
        self.sigma_events: List[SigmaEvent] = []
        self.sigma_exemptions: List[SigmaExemption] = []
        self.main_loop_runs: List[MainLoopRun] = []
        self.annotations: List[str] = []
        self.checks: Counter = Counter()
        self.edge_origin: Dict[int, EdgeOrigin] = {}
        self.initial_potential: Optional[Fraction] = None
        self._sigma_owner = {
            edge_id: w for w, edge_id in opt.sigma.edge.items() if not opt.in_tree(w)
        }

    @property
    def moves(self) -> int:
        return len(self.records)

    @property
    def critical_moves(self) -> int:
        return len(self.critical_events)

    def start(self, state: State) -> None:
        self.initial_potential = state.potential
        self.check("sandwich", sandwich_holds(state), "initial state", state)

    def check(self, name: str, ok: bool, detail: str = "", state: Optional[State] = None) -> None:
        self.checks[(name, ok)] += 1
        if ok:
            assertions_logger.debug("check %s passed %s", name, detail)
            return
        assertions_logger.error("check %s failed %s", name, detail)
        raise LemmaViolation(name, detail, state.snapshot() if state is not None else None)

    def exempt(self, event: SigmaExemption) -> None:
        self.sigma_exemptions.append(event)
        assertions_logger.info(
            "exemption v=%d edge=%d q=%d c_q=%s floor=%s sigma=%s", event.vertex, event.edge, event.member,
            format_rational(event.member_cost), format_rational(event.floor), format_rational(event.sigma_cost),
        )

    def annotate(self, tag: str, detail: str = "") -> None:
        note = f"{tag} {detail}".strip()
        self.annotations.append(note)
        assertions_logger.info("annotation %s", note)

    def record(self, move: Move, before: State, after: State) -> None:
        if len(self.records) >= self.guard:
            raise GuardExceededError(self.guard, after.snapshot())
        index = len(self.records)
        added = tuple(sorted(after.edges - before.edges))
        removed = tuple(sorted(before.edges - after.edges))
        tags: List[str] = [move.tag] if move.tag else []

        if move.kind is MoveKind.CRITICAL:
            self.critical_events.append(
                CriticalEvent(index, move.mover, move.e_a, move.e_b, move.critical_vertex, move.tag)
            )
        for edge_id in added:
            if move.kind is MoveKind.CRITICAL and edge_id in move.new_edges:
                self.edge_origin[edge_id] = EdgeOrigin("critical", index, move.mover)
            elif edge_id in self._sigma_owner:
                w = self._sigma_owner[edge_id]
                prior = before.first_edge(w) if w in before.vertices else None
                prior_cost = before.instance.cost(prior) if prior is not None else None
                self.sigma_events.append(SigmaEvent(index, w, edge_id, prior, prior_cost))
                self.edge_origin[edge_id] = EdgeOrigin("sigma", index, w)
                tags.append(f"sigma:{w}")
            elif edge_id in self.opt.tree.edges:
                self.edge_origin[edge_id] = EdgeOrigin("tree", index)
            else:
                self.check("edge-attribution", False, f"edge {edge_id} added by {move.kind.value}/{move.tag}", after)

        self.check("strict-decrease", after.potential < before.potential, f"move {index}", after)
        self.check("sandwich", sandwich_holds(after), f"move {index}", after)
        record = MoveRecord(index, move.kind.value, move.mover, move.delta, added, removed, tuple(tags), move)
        self.records.append(record)
        moves_logger.info(
            "move %d %s mover=%d dphi=%s added=%s removed=%s %s",
            index, record.kind, record.mover, format_rational(record.delta), list(added), list(removed), " ".join(tags),
        )


def z_set(state: State, opt: OptStructures) -> FrozenSet[int]:
    """Off-tree nonterminals in use whose sigma edge is cheap next to their first edge."""
    members = set()
    for w in state.instance.nonterminals:
        if w not in state.vertices or opt.in_tree(w) or w not in opt.sigma:
            continue
        e_w = state.first_edge(w)
        if e_w is None:
            continue
        low = edge_class(state.instance.cost(e_w)).low
        if state.instance.cost(opt.sigma.edge[w]) <= low / SATELLITE_DIVISOR:
            members.add(w)
    return frozenset(members)


@dataclass(frozen=True)
class Neighborhood:
    center: int
    anchor: int
    edge: int
    low: Fraction
    interval: Interval
    interval_vertices: Tuple[int, ...]
    satellites: Tuple[int, ...]

    @property
    def members(self) -> Tuple[int, ...]:
        return self.interval_vertices + self.satellites


def neighborhood(state: State, v: int, opt: OptStructures, e_v: Optional[int] = None) -> Neighborhood:
    if e_v is None:
        e_v = state.first_edge(v)
        if e_v is None:
            raise McastError(f"vertex {v} has no defined first edge")
    low = edge_class(state.instance.cost(e_v)).low
    anchor = opt.anchor(v)
    iv = interval(opt.cycle, anchor, low / NEIGHBORHOOD_DIVISOR)
    covered = interval_vertices(opt.cycle, iv)
    on_interval = set(covered)
    limit = low / SATELLITE_DIVISOR
    satellites = tuple(sorted(
        w for w in z_set(state, opt)
        if w != v
        and opt.sigma.terminal[w] in on_interval
        and state.instance.cost(opt.sigma.edge[w]) <= limit
    ))
    return Neighborhood(v, anchor, e_v, low, iv, covered, satellites)


def is_path_homogeneous(state: State, x: int, y: int, opt: OptStructures) -> bool:
    """|c_x - c_y| <= 4 * sum over classes of 256^(alpha+1) H^2 along the T* path."""
    path = opt.tree_path(x, y)
    counts = Counter(edge_class(state.instance.cost(e)).klass for e in path.edges)
    gap = abs(state.vertex_cost(x) - state.vertex_cost(y))
    return gap <= 2 * side_cost(counts)


def homogenize(state: State, path: Path, opt: OptStructures, trace: Optional[Trace] = None,
               protected: FrozenSet[int] = frozenset()) -> State:
    """Try prefixes of ``path`` until one lowers the potential, and commit it.

    For prefix ``i`` the vertices ``x_i .. x_1`` (in that order) reroute
    along T* to ``x_{i+1}`` and then follow its strategy in the state the
    call started from. The committed prefix is applied one player switch at
    a time and every switch must lower the potential on its own.
    """
    xs = path.vertices
    base = state
    for i in range(1, len(xs)):
        target = xs[i]
        tail = base.strategy_of(target)
        if tail is None:
            continue
        current = base
        changes: List[Tuple[int, Path]] = []
        for j in range(i, 0, -1):
            x_j = xs[j - 1]
            suffix = opt.tree_path(x_j, target).concat(tail)
            step, current = plan_move(current, vertex_move_changes(current, x_j, suffix, protected))
            changes.extend((switch.terminal, switch.new_path) for switch in step.switches)
        if not changes or not current.potential < base.potential:
            continue
        tag = f"homogenize:{xs[0]}-{xs[-1]}:{i}"
        for terminal, new_path in changes:
            move, after = plan_move(state, [(terminal, new_path)], MoveKind.SCRIPTED, tag=tag)
            if not after.potential < state.potential:
                raise LemmaViolation(
                    "homogenize-switch",
                    f"{tag}: switch of {terminal} changes the potential by {move.delta}",
                    state.snapshot(),
                )
            state = apply_move(state, move, trace)
        return state
    raise LemmaViolation(
        "homogenize-no-prefix",
        f"no prefix of {list(xs)} lowers the potential",
        state.snapshot(),
    )


def _strategy(state: State, v: int, u_v: Optional[int]) -> Optional[Path]:
    """``p_v``: the player's path, or ``u_v``'s suffix from a nonterminal ``v``."""
    if u_v is None:
        return state.paths.get(v)
    path = state.paths.get(u_v)
    if path is None or v not in path:
        return None
    return path.suffix_from(v)


def _try(state: State, changes, trace: Trace, tag: str) -> Optional[State]:
    """Apply ``changes`` as one move if that lowers the potential."""
    if not changes:
        return None
    move, after = plan_move(state, changes, MoveKind.SCRIPTED, tag=tag)
    if not move.switches or not after.potential < state.potential:
        return None
    return apply_move(state, move, trace)


def _repair_homogeneity(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace,
                        excluded: Tuple[int, ...], protected: FrozenSet[int]) -> Optional[State]:
    candidates = [x for x in nb.interval_vertices if x not in excluded]
    for x, y in combinations(candidates, 2):
        c_x, c_y = state.defined_cost(x), state.defined_cost(y)
        if c_x is None or c_y is None:
            continue
        path = opt.tree_path(x, y)
        if any(q in path for q in excluded):
            continue
        if is_path_homogeneous(state, x, y, opt):
            continue
        if c_x < c_y:
            path = path.reversed()
        logger.debug("Homogenizing %s", path.vertices)
        return homogenize(state, path, opt, trace, protected)
    return None


def _repair_uv_gap(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace, v: int, u_v: int,
                   protected: FrozenSet[int]) -> Optional[State]:
    members = set(nb.members) - {v, u_v}
    adjacent = [q for q in opt.tplus_neighbors(u_v) if q in members]
    for x in adjacent:
        c_x = state.defined_cost(x)
        if c_x is None:
            continue
        for y in adjacent:
            if y == x:
                continue
            c_y = state.defined_cost(y)
            p_y = state.strategy_of(y)
            if c_y is None or p_y is None or v in p_y or u_v in p_y:
                continue
            e_x, e_y = opt.tplus_edge(x, u_v), opt.tplus_edge(u_v, y)
            hop = state.instance.cost(e_x) + state.instance.cost(e_y)
            if c_x - c_y <= hop:
                continue
            suffix = Path((x, u_v, y), (e_x, e_y)).concat(p_y)
            result = _try(state, vertex_move_changes(state, x, suffix, protected), trace, f"uv-gap:{x}")
            if result is not None:
                return result
    return None


def _repair_satellite_gap(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace,
                          excluded: Tuple[int, ...], protected: FrozenSet[int]) -> Optional[State]:
    for w in nb.satellites:
        t_w = opt.sigma.terminal[w]
        if w in excluded or t_w in excluded:
            continue
        c_w, c_t = state.defined_cost(w), state.defined_cost(t_w)
        sigma_cost = state.instance.cost(opt.sigma.edge[w])
        if c_w is None or c_t is None or abs(c_w - c_t) <= sigma_cost:
            continue
        if c_t > c_w:
            mover, suffix = t_w, opt.sigma.path(w).reversed().concat(state.strategy_of(w))
        else:
            mover, suffix = w, opt.sigma.path(w).concat(state.strategy_of(t_w))
        result = _try(state, vertex_move_changes(state, mover, suffix, protected), trace, f"sigma-gap:{w}")
        if result is not None:
            return result
    return None


def _assert_homogeneous(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace,
                        excluded: Tuple[int, ...]) -> None:
    limit = HOMOGENEOUS_SPREAD * nb.low
    members = [q for q in nb.members if q not in excluded]
    for x, y in combinations(members, 2):
        c_x, c_y = state.defined_cost(x), state.defined_cost(y)
        if c_x is None or c_y is None:
            continue
        if any(q in opt.tplus_path(x, y) for q in excluded):
            continue
        trace.check("neighborhood-homogeneous", abs(c_x - c_y) <= limit,
                    f"v={nb.center} pair ({x},{y}) gap {abs(c_x - c_y)} > {limit}", state)


def _deletion_pass(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace,
                   v: int, u_v: Optional[int]) -> Optional[State]:
    members = set(nb.members) - {v, u_v}
    c_v = state.share(_strategy(state, v, u_v))
    near_v = set(opt.tplus_neighbors(v))
    near_u = set(opt.tplus_neighbors(u_v)) if u_v is not None else set()
    for q in sorted(members & (near_v | near_u)):
        c_q = state.defined_cost(q)
        p_q = state.strategy_of(q)
        if c_q is None or p_q is None:
            continue
        if q in near_v and v not in p_q:
            hop = opt.tplus_edge(v, q)
            if state.instance.cost(hop) + c_q < c_v:
                suffix = Path((v, q), (hop,)).concat(p_q)
                if u_v is None:
                    changes = [(v, suffix)]
                else:
                    changes = vertex_move_changes(state, v, suffix)
                deleted = _try(state, changes, trace, f"delete:{v}-{q}")
                if deleted is not None:
                    return deleted
                trace.annotate("delete-skip", f"v={v} q={q}")
        if u_v is not None and q in near_u and u_v not in p_q:
            hop = opt.tplus_edge(u_v, q)
            if state.instance.cost(hop) + c_q < state.player_cost(u_v):
                suffix = Path((u_v, q), (hop,)).concat(p_q)
                deleted = _try(state, [(u_v, suffix)], trace, f"delete:{u_v}-{q}")
                if deleted is not None:
                    return deleted
                trace.annotate("delete-skip", f"u_v={u_v} q={q}")
    return None


def _check_absorb_precondition(state: State, nb: Neighborhood, opt: OptStructures, trace: Trace,
                               v: int, u_v: Optional[int]) -> None:
    """Every neighborhood member costs at least ``c_v - 2/7 low``.

    An off-tree ``v`` whose sigma edge costs more than ``low/64`` is outside
    Z, so its edge is charged through E_sigma instead; a shortfall there is
    recorded as an exemption rather than failing the run.
    """
    c_v = state.share(_strategy(state, v, u_v))
    floor = c_v - ABSORB_SLACK * nb.low
    sigma_cost = None if opt.in_tree(v) else state.instance.cost(opt.sigma.edge[v])
    exempt = sigma_cost is not None and sigma_cost > nb.low / SATELLITE_DIVISOR
    for q in nb.members:
        if q in (v, u_v):
            continue
        c_q = state.defined_cost(q)
        if c_q is None:
            continue
        if c_q >= floor:
            trace.check("absorb-precondition", True)
        elif exempt:
            trace.exempt(SigmaExemption(trace.moves, v, nb.edge, q, c_q, floor, sigma_cost))
        else:
            trace.check("absorb-precondition", False, f"v={v} q={q}: {c_q} < {floor}", state)


def _sole_usage(state: State, v: int, e_v: int, u_v: Optional[int]) -> bool:
    """Only ``v`` (or, for a nonterminal, paths through ``u_v``) use ``e_v``."""
    users = state.users_of(e_v)
    if u_v is None:
        return users == (v,)
    return bool(users) and all(u_v in state.paths[t] and v in state.paths[t] for t in users)


def _check_sole_usage(state: State, v: int, e_v: int, u_v: Optional[int], trace: Trace) -> None:
    users = state.users_of(e_v)
    trace.check("absorb-sole-usage", _sole_usage(state, v, e_v, u_v), f"edge {e_v} used by {list(users)}", state)


def absorb(state: State, opt: OptStructures, trace: Trace, config: RunConfig, *,
           v: int, e_v: int, u_v: Optional[int] = None) -> State:
    """``v`` absorbs its neighborhood: T* members route through ``v``, then
    satellites fall back onto their sigma edges."""
    _check_sole_usage(state, v, e_v, u_v, trace)
    nb = neighborhood(state, v, opt, e_v)
    protected = frozenset({v}) if u_v is None else frozenset({u_v})
    p_v = _strategy(state, v, u_v)
    tail = p_v if opt.in_tree(v) else opt.sigma.path(v).reversed().concat(p_v)

    source = nb.anchor if config.absorb_order == "from-v" else opt.instance.root
    on_interval = set(nb.interval_vertices) - {v, u_v}
    for q in (x for x in opt.bfs_order(source) if x in on_interval):
        suffix = opt.tree_path(q, nb.anchor).concat(tail)
        changes = vertex_move_changes(state, q, suffix, protected)
        if not changes:
            continue
        move, after = plan_move(state, changes, MoveKind.SCRIPTED, tag=f"absorb-tree:{v}<-{q}")
        trace.check("absorb-improving", after.potential < state.potential, f"v={v} q={q} delta={move.delta}", state)
        state = apply_move(state, move, trace)

    snapshot = state
    entry_edges = {s: snapshot.first_edge(s) for s in nb.satellites}
    unmovable = set()
    depth = {}
    for s in nb.satellites:
        strategy = snapshot.strategy_of(s)
        if strategy is not None:
            depth[s] = len(strategy)
        else:
            unmovable.add(s)
    for q in sorted(depth, key=lambda s: (depth[s], s), reverse=True):
        if q not in state.vertices or state.first_edge(q) == opt.sigma.edge[q]:
            continue
        t_q = opt.sigma.terminal[q]
        anchor_path = snapshot.strategy_of(t_q)
        if anchor_path is None or q in anchor_path:
            unmovable.add(q)
            continue
        suffix = opt.sigma.path(q).concat(anchor_path)
        changes = vertex_move_changes(state, q, suffix, protected)
        if not changes:
            continue
        move, after = plan_move(state, changes, MoveKind.SCRIPTED, tag=f"absorb-satellite:{v}<-{q}")
        trace.check("absorb-improving", after.potential < state.potential,
                    f"v={v} satellite={q} delta={move.delta}", state)
        state = apply_move(state, move, trace)

    for s in sorted(unmovable):
        trace.annotate("absorb-satellite-unmovable", f"v={v} s={s}")
    klass = edge_class(opt.instance.cost(e_v)).klass
    for s, e_s in entry_edges.items():
        if s in unmovable or e_s is None or edge_class(opt.instance.cost(e_s)).klass > klass:
            continue
        replaced = e_s not in state.edges or state.first_edge(s) == opt.sigma.edge[s]
        trace.check("absorb-satellite-replaced", replaced, f"v={v} s={s} still uses {e_s}", state)
    return state


def main_loop(state: State, opt: OptStructures, trace: Trace, config: RunConfig, *,
              v: int, e_v: int, u_v: Optional[int] = None) -> State:
    """Repair around the just-added edge ``e_v``, then delete it or absorb."""
    trace.main_loop_runs.append(MainLoopRun(trace.moves, v, e_v, u_v))
    logger.info("Main loop for edge %d at vertex %d (u_v=%s)", e_v, v, u_v)
    excluded = (v,) if u_v is None else (v, u_v)
    protected = frozenset({v}) if u_v is None else frozenset({u_v})

    while True:
        nb = neighborhood(state, v, opt, e_v)
        repaired = _repair_homogeneity(state, nb, opt, trace, excluded, protected)
        if repaired is None and u_v is not None:
            repaired = _repair_uv_gap(state, nb, opt, trace, v, u_v, protected)
        if repaired is None:
            repaired = _repair_satellite_gap(state, nb, opt, trace, excluded, protected)
        if repaired is None and not state.is_tree(protected):
            repaired = make_tree(state, protected, trace)
        if repaired is None:
            break
        state = repaired

    _assert_homogeneous(state, nb, opt, trace, excluded)
    deleted = _deletion_pass(state, nb, opt, trace, v, u_v)
    if deleted is not None:
        return deleted
    _check_absorb_precondition(state, nb, opt, trace, v, u_v)
    return absorb(state, opt, trace, config, v=v, e_v=e_v, u_v=u_v)


def _still_critical(state: State, v: int, e_v: int, u_v: Optional[int]) -> bool:
    strategy = _strategy(state, v, u_v)
    if strategy is None or not strategy.edges or strategy.edges[0] != e_v:
        return False
    return _sole_usage(state, v, e_v, u_v)


@dataclass
class RunResult:
    original: Instance
    instance: Instance
    scale: Fraction
    opt: OptStructures
    final: State
    trace: Trace
    verdict: NashVerdict


def run(instance: Instance, config: Optional[RunConfig] = None) -> RunResult:
    """Run the scheduled dynamics from T* until no player can improve."""
    config = config or RunConfig()
    normalized, scale = normalize_costs(instance)
    tree = exact_steiner(normalized, config.steiner_terminal_cap)
    pruned = prune_heavy_edges(normalized, tree.total_cost)
    opt = build_opt_structures(pruned, tree)
    state = initial_state(opt)
    trace = Trace(opt, config.guard)
    trace.start(state)
    logger.info("Starting dynamics: %d players, c(T*)=%s, phi=%s", len(state.paths), tree.total_cost, state.potential)

    try:
        while True:
            move = find_scheduled_move(state, opt)
            if move is None:
                break
            state = apply_move(state, move, trace)
            if move.kind is MoveKind.CRITICAL:
                state = _after_critical(state, move, opt, trace, config)
            if not state.tree_flag:
                state = make_tree(state, frozenset(), trace)
    except GuardExceededError:
        logger.error("Guard of %d moves exceeded", config.guard)
        raise
    except McastError:
        logger.exception("Dynamics aborted after %d moves", trace.moves)
        raise

    verdict = is_nash(state)
    trace.check("final-nash", verdict.is_nash, f"terminal {verdict.terminal} can improve", state)
    trace.check("final-tree", state.tree_flag, "", state)
    logger.info("Reached equilibrium after %d moves (%d critical), cost %s",
                trace.moves, trace.critical_moves, state.cost)
    return RunResult(instance, pruned, scale, opt, state, trace, verdict)


def _after_critical(state: State, move: Move, opt: OptStructures, trace: Trace, config: RunConfig) -> State:
    u = move.mover
    if move.tag == "irregular":
        logger.warning("Irregular critical move by %d adds %s; no main loop", u, list(move.new_edges))
        trace.annotate("irregular-critical", f"mover={u} new={list(move.new_edges)}")
        return state
    if move.e_b is not None:
        b = move.critical_vertex
        if _still_critical(state, b, move.e_b, u):
            state = main_loop(state, opt, trace, config, v=b, e_v=move.e_b, u_v=u)
        else:
            logger.warning("Skipping main loop for edge %d: no longer used by %d alone", move.e_b, u)
            trace.annotate("main-loop-skipped", f"edge {move.e_b} no longer used by {u} alone")
    if move.e_a is not None:
        if _still_critical(state, u, move.e_a, None):
            state = main_loop(state, opt, trace, config, v=u, e_v=move.e_a)
        elif u in state.paths and state.paths[u].edges[0] == move.e_a:
            logger.warning("Skipping main loop for edge %d: it is shared", move.e_a)
            trace.annotate("main-loop-skipped", f"edge {move.e_a} is shared")
    return state


__all__ = [
    "CriticalEvent",
    "EdgeOrigin",
    "MainLoopRun",
    "MoveRecord",
    "Neighborhood",
    "RunResult",
    "SigmaEvent",
    "SigmaExemption",
    "Trace",
    "absorb",
    "homogenize",
    "is_path_homogeneous",
    "main_loop",
    "neighborhood",
    "run",
    "z_set",
]
