"""Game engine: routing states, cost shares, the potential and improving moves."""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import permutations
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from instance import Instance, Path, check_path
from utils.errors import (
    InvalidPathError,
    LemmaViolation,
    McastError,
    NonImprovingMoveError,
    NotATreeError,
    UndefinedCostError,
)
from utils.rational import format_rational, harmonic

if TYPE_CHECKING:  # pragma: no cover
    from dynamics import Trace
    from steiner import OptStructures

logger = logging.getLogger(__name__)


class State:
    """One simple terminal-to-root path per player, with derived edge usage.

    States are treated as values: every change produces a new ``State``.
    """

    def __init__(self, instance: Instance, paths: Mapping[int, Path], usage: Optional[Counter] = None):
        self.instance = instance
        self.paths: Dict[int, Path] = dict(paths)
        if usage is None:
            usage = Counter()
            for path in self.paths.values():
                usage.update(path.edges)
        self.usage: Counter = Counter({e: n for e, n in usage.items() if n > 0})

    @classmethod
    def from_paths(cls, instance: Instance, paths: Mapping[int, Path]) -> "State":
        """Build a state after checking every path and that every player has one."""
        missing = [u for u in instance.players if u not in paths]
        if missing:
            raise InvalidPathError(f"no path for players {missing}")
        for u, path in paths.items():
            check_path(instance, u, path)
        return cls(instance, {u: p for u, p in paths.items() if u != instance.root})

    @cached_property
    def edges(self) -> FrozenSet[int]:
        return frozenset(self.usage)

    @cached_property
    def potential(self) -> Fraction:
        return sum((self.instance.cost(e) * harmonic(n) for e, n in self.usage.items()), Fraction(0))

    @cached_property
    def cost(self) -> Fraction:
        return self.instance.total_cost(self.usage)

    @cached_property
    def vertices(self) -> FrozenSet[int]:
        on_paths: Set[int] = set()
        for path in self.paths.values():
            on_paths.update(path.vertices)
        return frozenset(on_paths)

    def share(self, path: Path) -> Fraction:
        """What one current user of every edge on ``path`` pays for it."""
        return sum((self.instance.cost(e) / self.usage[e] for e in path.edges), Fraction(0))

    def player_cost(self, u: int) -> Fraction:
        return self.share(self.paths[u])

    def marginal_weight(self, u: int, edge_id: int) -> Fraction:
        """Share ``u`` would pay on ``edge_id`` with everyone else fixed."""
        others = self.usage[edge_id] - (1 if edge_id in self.paths[u].edges else 0)
        return self.instance.cost(edge_id) / (others + 1)

    def deviation_cost(self, u: int, path: Path) -> Fraction:
        return sum((self.marginal_weight(u, e) for e in path.edges), Fraction(0))

    def through(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(u for u, p in self.paths.items() if v in p))

    def users_of(self, edge_id: int) -> Tuple[int, ...]:
        return tuple(sorted(u for u, p in self.paths.items() if edge_id in p.edges))

    def next_hops(self, excluded: FrozenSet[int] = frozenset()) -> Dict[int, Set[int]]:
        hops: Dict[int, Set[int]] = {}
        for u, path in self.paths.items():
            if u in excluded:
                continue
            for v, edge_id in zip(path.vertices, path.edges):
                hops.setdefault(v, set()).add(edge_id)
        return hops

    def is_tree(self, excluded: FrozenSet[int] = frozenset()) -> bool:
        """Every vertex has a single next hop among the non-excluded paths."""
        return all(len(h) == 1 for h in self.next_hops(excluded).values())

    @cached_property
    def tree_flag(self) -> bool:
        return self.is_tree()

    def suffix_of(self, v: int) -> Optional[Path]:
        """The common ``v -> root`` suffix, or ``None`` if absent or diverging."""
        if v == self.instance.root:
            return Path.trivial(v)
        suffixes = {p.suffix_from(v) for p in self.paths.values() if v in p}
        return suffixes.pop() if len(suffixes) == 1 else None

    def strategy_of(self, v: int) -> Optional[Path]:
        """``p_v(S)``: a player's own path, otherwise the common suffix."""
        if v in self.paths:
            return self.paths[v]
        return self.suffix_of(v)

    def first_edge(self, v: int) -> Optional[int]:
        if v in self.paths:
            return self.paths[v].edges[0]
        hops = self.next_hops().get(v, set())
        return next(iter(hops)) if len(hops) == 1 else None

    def vertex_cost(self, v: int) -> Fraction:
        """``c_v(S)``; raises :class:`UndefinedCostError` where it is not defined."""
        strategy = self.strategy_of(v)
        if strategy is None:
            raise UndefinedCostError(v)
        return self.share(strategy)

    def defined_cost(self, v: int) -> Optional[Fraction]:
        try:
            return self.vertex_cost(v)
        except UndefinedCostError:
            return None

    def switch(self, u: int, new_path: Path) -> "State":
        """Replace ``u``'s path and check the potential identity exactly."""
        check_path(self.instance, u, new_path)
        old_path = self.paths[u]
        usage = Counter(self.usage)
        usage.subtract(old_path.edges)
        usage.update(new_path.edges)
        paths = dict(self.paths)
        paths[u] = new_path
        after = State(self.instance, paths, usage)
        if after.potential - self.potential != after.player_cost(u) - self.player_cost(u):
            raise LemmaViolation(
                "potential-identity",
                f"terminal {u}: delta phi {after.potential - self.potential}",
                self.snapshot(),
            )
        return after

    def snapshot(self) -> Dict[str, object]:
        return {
            "potential": format_rational(self.potential),
            "paths": {str(u): list(p.edges) for u, p in sorted(self.paths.items())},
        }

    def __eq__(self, other: object) -> bool:
        return isinstance(other, State) and self.paths == other.paths

    def __repr__(self) -> str:
        return f"State(players={len(self.paths)}, edges={sorted(self.usage)}, potential={self.potential})"


def initial_state(opt: "OptStructures") -> State:
    """Every player routes along T*."""
    instance = opt.instance
    return State(instance, {u: opt.tree_path(u, instance.root) for u in instance.players})


def potential(state: State) -> Fraction:
    return state.potential


def player_cost(state: State, u: int) -> Fraction:
    return state.player_cost(u)


def vertex_cost(state: State, v: int) -> Fraction:
    return state.vertex_cost(v)


def cleanup_unused(state: State) -> State:
    """Recount usage from the paths; edges nobody uses are dropped."""
    cleaned = State(state.instance, state.paths)
    dropped = set(state.usage) - set(cleaned.usage)
    if dropped:
        logger.debug("Dropped unused edges %s", sorted(dropped))
    return cleaned


def sandwich_holds(state: State) -> bool:
    """c(S) <= Phi(S) <= H_k c(S) for k players."""
    return state.cost <= state.potential <= harmonic(len(state.paths)) * state.cost


@dataclass(frozen=True)
class BestResponse:
    path: Path
    cost: Fraction


def best_response(state: State, u: int, allowed: Optional[FrozenSet[int]] = None) -> BestResponse:
    """Cheapest path for ``u`` with the other players fixed.

    Dijkstra over marginal shares; equal costs are broken by the
    lexicographically smaller vertex sequence, then edge ids.
    """
    instance = state.instance
    heap: List[Tuple[Fraction, Tuple[int, ...], Tuple[int, ...]]] = [(Fraction(0), (u,), ())]
    settled: Set[int] = set()
    while heap:
        cost, vertices, edges = heapq.heappop(heap)
        v = vertices[-1]
        if v in settled:
            continue
        settled.add(v)
        if v == instance.root:
            return BestResponse(Path(vertices, edges), cost)
        for edge in instance.incident[v]:
            if allowed is not None and edge.id not in allowed:
                continue
            w = edge.other(v)
            if w in settled:
                continue
            heapq.heappush(heap, (cost + state.marginal_weight(u, edge.id), vertices + (w,), edges + (edge.id,)))
    raise McastError(f"terminal {u} cannot reach the root over the allowed edges")


@dataclass(frozen=True)
class NashVerdict:
    is_nash: bool
    terminal: Optional[int] = None
    path: Optional[Path] = None
    current_cost: Optional[Fraction] = None
    deviation_cost: Optional[Fraction] = None

    def __bool__(self) -> bool:
        return self.is_nash


def is_nash(state: State) -> NashVerdict:
    for u in sorted(state.paths):
        current = state.player_cost(u)
        response = best_response(state, u)
        if response.cost < current:
            return NashVerdict(False, u, response.path, current, response.cost)
    return NashVerdict(True)


class MoveKind(str, Enum):
    SAFE = "safe"
    CRITICAL = "critical"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class Switch:
    terminal: int
    old_path: Path
    new_path: Path


@dataclass(frozen=True)
class Move:
    """One applied step of the dynamics.

    Safe and critical moves carry a single switch. Scripted moves (group
    reroutes inside the main loop, MakeTree merges) may carry several; the
    potential must drop across the whole move.
    """

    kind: MoveKind
    switches: Tuple[Switch, ...]
    phi_before: Fraction
    phi_after: Fraction
    new_edges: Tuple[int, ...] = ()
    e_a: Optional[int] = None
    e_b: Optional[int] = None
    tag: str = ""

    @property
    def mover(self) -> int:
        return self.switches[0].terminal

    @property
    def old_path(self) -> Path:
        return self.switches[0].old_path

    @property
    def new_path(self) -> Path:
        return self.switches[0].new_path

    @property
    def delta(self) -> Fraction:
        return self.phi_after - self.phi_before

    @property
    def critical_vertex(self) -> Optional[int]:
        """The nonterminal reached over ``e_b``, if the move added one."""
        return self.new_path.vertices[1] if self.e_b is not None else None


def plan_move(state: State, changes: Iterable[Tuple[int, Path]], kind: MoveKind = MoveKind.SCRIPTED,
              **meta) -> Tuple[Move, State]:
    """Apply ``changes`` in order without recording; returns the move and the result."""
    current = state
    switches: List[Switch] = []
    for terminal, new_path in changes:
        old_path = current.paths[terminal]
        if new_path == old_path:
            continue
        current = current.switch(terminal, new_path)
        switches.append(Switch(terminal, old_path, new_path))
    move = Move(kind, tuple(switches), state.potential, current.potential, **meta)
    return move, current


def apply_move(state: State, move: Move, trace: Optional["Trace"] = None) -> State:
    """Apply ``move``, checking the potential identity and strict decrease."""
    if not move.switches:
        raise NonImprovingMoveError("empty move", state.snapshot())
    if move.phi_before != state.potential:
        raise LemmaViolation("stale-move", "move was planned against a different state", state.snapshot())
    current = state
    for switch in move.switches:
        if current.paths.get(switch.terminal) != switch.old_path:
            raise InvalidPathError(f"terminal {switch.terminal} is not on the move's old path")
        current = current.switch(switch.terminal, switch.new_path)
    if current.potential != move.phi_after:
        raise LemmaViolation("potential-mismatch", f"expected {move.phi_after}, got {current.potential}", state.snapshot())
    if not move.phi_after < move.phi_before:
        raise NonImprovingMoveError(
            f"{move.kind.value}/{move.tag or '-'} by {move.mover}: delta {move.delta}", state.snapshot()
        )
    if trace is not None:
        trace.record(move, state, current)
    return current


def vertex_move_changes(state: State, x: int, suffix: Path,
                        protected: FrozenSet[int] = frozenset()) -> List[Tuple[int, Path]]:
    """Every unprotected player through ``x`` keeps its prefix and takes ``suffix``.

    Players are ordered by their distance to ``x`` along their path, then id.
    """
    if suffix.start != x:
        raise InvalidPathError(f"suffix starts at {suffix.start}, expected {x}")
    users = [u for u, p in state.paths.items() if x in p and u not in protected]
    users.sort(key=lambda u: (state.paths[u].index(x), u))
    changes = []
    for u in users:
        new_path = state.paths[u].prefix_to(x).concat(suffix).loop_erased()
        if new_path != state.paths[u]:
            changes.append((u, new_path))
    return changes


def _tail_for(state: State, x: int) -> Optional[Path]:
    return state.strategy_of(x)


def _classify(state: State, path: Path, existing: FrozenSet[int]) -> Tuple[Tuple[int, ...], bool]:
    """New edges of ``path`` and whether they sit where a critical move allows.

    The first edge must be new. A second new edge must leave a nonterminal
    that no player uses yet.
    """
    new_edges = tuple(e for e in path.edges if e not in existing)
    if not new_edges:
        return new_edges, True
    head = path.edges[:2]
    regular = path.edges[0] in new_edges and all(e in head for e in new_edges)
    if regular and len(path.edges) > 1 and path.edges[1] in new_edges:
        x = path.vertices[1]
        regular = not state.instance.is_terminal(x) and x not in state.vertices
    return new_edges, regular


def _critical_move(state: State, u: int, path: Path, gain: Fraction, new_edges: Tuple[int, ...],
                   tag: str = "") -> Move:
    e_a = path.edges[0] if path.edges[0] in new_edges else None
    e_b = path.edges[1] if len(path.edges) > 1 and path.edges[1] in new_edges else None
    if e_a is None and tag != "irregular":
        raise LemmaViolation("critical-shape", f"first edge {path.edges[0]} of {path.vertices} is not new", state.snapshot())
    switch = Switch(u, state.paths[u], path)
    return Move(MoveKind.CRITICAL, (switch,), state.potential, state.potential - gain,
                new_edges=new_edges, e_a=e_a, e_b=e_b, tag=tag)


def find_scheduled_move(state: State, opt: "OptStructures") -> Optional[Move]:
    """Most improving safe move, else most improving critical move, else ``None``.

    ``None`` is returned exactly when the state is a Nash equilibrium.
    """
    if not state.tree_flag:
        raise NotATreeError("the scheduler needs a state whose paths form a tree")
    instance = state.instance
    existing = state.edges | opt.tree.edges

    best_safe = None
    for u in sorted(state.paths):
        current = state.player_cost(u)
        response = best_response(state, u, allowed=existing)
        if response.cost < current:
            key = (-(current - response.cost), u, response.path.vertices, response.path.edges)
            if best_safe is None or key < best_safe[0]:
                best_safe = (key, u, response.path, current - response.cost)
    if best_safe is not None:
        _, u, path, gain = best_safe
        switch = Switch(u, state.paths[u], path)
        return Move(MoveKind.SAFE, (switch,), state.potential, state.potential - gain)

    best_critical = None

    def consider(u: int, path: Path, current: Fraction) -> None:
        nonlocal best_critical
        if not path.is_simple():
            return
        new_edges = tuple(e for e in path.edges[:2] if e not in existing)
        if not new_edges:
            return
        cost = state.deviation_cost(u, path)
        if cost >= current:
            return
        key = (-(current - cost), u, path.vertices, path.edges)
        if best_critical is None or key < best_critical[0]:
            best_critical = (key, u, path, current - cost, new_edges)

    for u in sorted(state.paths):
        current = state.player_cost(u)
        for edge in instance.incident[u]:
            x = edge.other(u)
            tail = _tail_for(state, x)
            if tail is not None:
                consider(u, Path((u,) + tail.vertices, (edge.id,) + tail.edges), current)
            # a second new edge may only leave a fresh nonterminal
            if instance.is_terminal(x) or x in state.vertices or edge.id in existing:
                continue
            for second in instance.incident[x]:
                y = second.other(x)
                if second.id == edge.id or y == u:
                    continue
                tail = _tail_for(state, y)
                if tail is not None:
                    consider(u, Path((u, x) + tail.vertices, (edge.id, second.id) + tail.edges), current)

    if best_critical is not None:
        _, u, path, gain, new_edges = best_critical
        return _critical_move(state, u, path, gain, new_edges)

    verdict = is_nash(state)
    if verdict:
        return None
    return _decompose_witness(state, opt, verdict, existing)


def _decompose_witness(state: State, opt: "OptStructures", verdict: NashVerdict,
                       existing: FrozenSet[int]) -> Move:
    """Turn an arbitrary improving deviation into a scheduled move.

    Scans the terminals on the deviation from the root end; the first one
    whose remaining suffix improves on its current path moves. The
    deviating terminal itself always qualifies.
    """
    witness = verdict.path
    for i in range(len(witness.vertices) - 1, -1, -1):
        x = witness.vertices[i]
        if x not in state.paths:
            continue
        candidate = witness.suffix_from(x)
        current = state.player_cost(x)
        if candidate == state.paths[x]:
            continue
        cost = state.deviation_cost(x, candidate)
        if cost >= current:
            continue
        new_edges, regular = _classify(state, candidate, existing)
        if not new_edges:
            switch = Switch(x, state.paths[x], candidate)
            return Move(MoveKind.SAFE, (switch,), state.potential, state.potential - (current - cost), tag="fallback")
        tag = "fallback" if regular else "irregular"
        logger.info("Scheduler fell back to a decomposed deviation for %s (%s)", x, tag)
        return _critical_move(state, x, candidate, current - cost, new_edges, tag)
    raise LemmaViolation("witness-decomposition", f"no improving suffix on {witness.vertices}", state.snapshot())


def _first_divergence(state: State, excluded: FrozenSet[int]) -> Tuple[Optional[int], Dict[Path, List[int]]]:
    hops = state.next_hops(excluded)
    diverging = sorted(v for v, h in hops.items() if len(h) > 1)
    if not diverging:
        return None, {}
    x = diverging[0]
    groups: Dict[Path, List[int]] = {}
    for u in sorted(state.paths):
        if u in excluded or x not in state.paths[u]:
            continue
        groups.setdefault(state.paths[u].suffix_from(x), []).append(u)
    return x, groups


def make_tree(state: State, excluded: FrozenSet[int] = frozenset(), trace: Optional["Trace"] = None) -> State:
    """Merge diverging suffixes until the non-excluded paths form a tree.

    At the smallest vertex with two or more suffixes, one whole group of
    players moves onto another group's suffix; of all such merges the one
    leaving the lowest potential is taken. For any two groups one of the
    two directions strictly lowers the potential.
    """
    phi_start = state.potential
    edges_start = state.edges
    guarded = {u: state.paths[u].edges[0] for u in excluded if u in state.paths and state.paths[u].edges}
    usage_start = {e: state.usage[e] for e in guarded.values()}

    current = state
    while True:
        x, groups = _first_divergence(current, excluded)
        if x is None:
            break
        best = None
        for (source, movers), (target, _) in permutations(groups.items(), 2):
            changes = [(u, current.paths[u].prefix_to(x).concat(target).loop_erased()) for u in movers]
            move, after = plan_move(current, changes, MoveKind.SCRIPTED, tag="make-tree")
            key = (after.potential, target.vertices, source.vertices)
            if best is None or key < best[0]:
                best = (key, move)
        current = apply_move(current, best[1], trace)

    if current.potential > phi_start:
        raise LemmaViolation("make-tree-potential", f"{phi_start} -> {current.potential}", current.snapshot())
    if not current.edges <= edges_start:
        raise LemmaViolation("make-tree-subset", f"new edges {sorted(current.edges - edges_start)}", current.snapshot())
    if not current.is_tree(excluded):
        raise LemmaViolation("make-tree-acyclic", "", current.snapshot())
    for edge_id in guarded.values():
        if current.usage[edge_id] > usage_start[edge_id]:
            raise LemmaViolation("make-tree-sharing", f"usage of protected edge {edge_id} grew", current.snapshot())
    return current


__all__ = [
    "BestResponse",
    "Move",
    "MoveKind",
    "NashVerdict",
    "State",
    "Switch",
    "apply_move",
    "best_response",
    "cleanup_unused",
    "find_scheduled_move",
    "initial_state",
    "is_nash",
    "make_tree",
    "plan_move",
    "player_cost",
    "potential",
    "sandwich_holds",
    "vertex_cost",
    "vertex_move_changes",
]
