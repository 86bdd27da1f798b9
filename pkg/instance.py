"""Instance data model for multicast cost-sharing games on quasi-bipartite graphs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from utils.errors import InstanceValidationError, InvalidPathError, ParameterError
from utils.rational import RationalLike, to_fraction

logger = logging.getLogger(__name__)

CLASS_BASE = 256


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    cost: Fraction

    def other(self, x: int) -> int:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise ValueError(f"vertex {x} is not an endpoint of edge {self.id}")

    @property
    def endpoints(self) -> Tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class EdgeClass:
    klass: int
    low: Fraction
    upp: Fraction


@dataclass(frozen=True)
class Path:
    """A walk given by its vertex sequence and the edge ids between them."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.vertices) != len(self.edges) + 1:
            raise InvalidPathError(
                f"path with {len(self.vertices)} vertices cannot carry {len(self.edges)} edges"
            )

    @classmethod
    def trivial(cls, vertex: int) -> "Path":
        return cls((vertex,), ())

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, vertex: object) -> bool:
        return vertex in self.vertices

    def is_simple(self) -> bool:
        return len(set(self.vertices)) == len(self.vertices)

    def index(self, vertex: int) -> int:
        return self.vertices.index(vertex)

    def prefix_to(self, vertex: int) -> "Path":
        i = self.index(vertex)
        return Path(self.vertices[: i + 1], self.edges[:i])

    def suffix_from(self, vertex: int) -> "Path":
        i = self.index(vertex)
        return Path(self.vertices[i:], self.edges[i:])

    def concat(self, other: "Path") -> "Path":
        if self.end != other.start:
            raise InvalidPathError(f"cannot join a path ending at {self.end} to one starting at {other.start}")
        return Path(self.vertices + other.vertices[1:], self.edges + other.edges)

    def reversed(self) -> "Path":
        return Path(tuple(reversed(self.vertices)), tuple(reversed(self.edges)))

    def loop_erased(self) -> "Path":
        """Chronological loop erasure: each revisit cuts back to the first visit."""
        vertices: List[int] = [self.vertices[0]]
        edges: List[int] = []
        position = {self.vertices[0]: 0}
        for edge_id, vertex in zip(self.edges, self.vertices[1:]):
            if vertex in position:
                cut = position[vertex]
                for dropped in vertices[cut + 1:]:
                    del position[dropped]
                vertices = vertices[: cut + 1]
                edges = edges[:cut]
            else:
                vertices.append(vertex)
                edges.append(edge_id)
                position[vertex] = len(vertices) - 1
        return Path(tuple(vertices), tuple(edges))


@dataclass(frozen=True)
class Instance:
    """Immutable weighted multigraph with terminal set and root.

    Edges are identified by id, so parallel edges are allowed. Construct
    through :func:`build_instance` to get validation.
    """

    vertex_count: int
    edges: Tuple[Edge, ...]
    terminals: frozenset
    root: int
    labels: Mapping[int, str] = field(default_factory=dict)

    @cached_property
    def edge_by_id(self) -> Dict[int, Edge]:
        return {edge.id: edge for edge in self.edges}

    @cached_property
    def incident(self) -> Dict[int, Tuple[Edge, ...]]:
        table: Dict[int, List[Edge]] = {v: [] for v in range(self.vertex_count)}
        for edge in sorted(self.edges, key=lambda e: e.id):
            table[edge.u].append(edge)
            table[edge.v].append(edge)
        return {v: tuple(edges) for v, edges in table.items()}

    @cached_property
    def players(self) -> Tuple[int, ...]:
        """Terminals other than the root, in ascending order."""
        return tuple(sorted(t for t in self.terminals if t != self.root))

    @cached_property
    def nonterminals(self) -> Tuple[int, ...]:
        return tuple(v for v in range(self.vertex_count) if v not in self.terminals)

    def cost(self, edge_id: int) -> Fraction:
        return self.edge_by_id[edge_id].cost

    def is_terminal(self, vertex: int) -> bool:
        return vertex in self.terminals

    def total_cost(self, edge_ids: Iterable[int]) -> Fraction:
        return sum((self.edge_by_id[e].cost for e in edge_ids), Fraction(0))

    def to_multigraph(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(self.vertex_count))
        for edge in sorted(self.edges, key=lambda e: e.id):
            graph.add_edge(edge.u, edge.v, key=edge.id, weight=edge.cost)
        return graph

    def walk(self, start: int, edge_ids: Sequence[int]) -> Path:
        """Build the path that starts at ``start`` and follows ``edge_ids``."""
        vertices = [start]
        for edge_id in edge_ids:
            edge = self.edge_by_id.get(edge_id)
            if edge is None:
                raise InvalidPathError(f"unknown edge id {edge_id}")
            try:
                vertices.append(edge.other(vertices[-1]))
            except ValueError as exc:
                raise InvalidPathError(str(exc)) from exc
        return Path(tuple(vertices), tuple(edge_ids))

    def structure(self) -> Tuple:
        """Structural content used for equality across parse/serialize."""
        return (
            self.vertex_count,
            tuple(sorted((e.id, min(e.endpoints), max(e.endpoints), e.cost) for e in self.edges)),
            tuple(sorted(self.terminals)),
            self.root,
            tuple(sorted(self.labels.items())),
        )


def check_path(instance: Instance, terminal: int, path: Path) -> None:
    """Raise :class:`InvalidPathError` unless ``path`` is a simple terminal-to-root path."""
    if path.start != terminal:
        raise InvalidPathError(f"path for {terminal} starts at {path.start}")
    if path.end != instance.root:
        raise InvalidPathError(f"path for {terminal} ends at {path.end}, not the root")
    if not path.is_simple():
        raise InvalidPathError(f"path for {terminal} revisits a vertex")
    for i, edge_id in enumerate(path.edges):
        edge = instance.edge_by_id.get(edge_id)
        if edge is None or {path.vertices[i], path.vertices[i + 1]} != set(edge.endpoints):
            raise InvalidPathError(f"edge {edge_id} does not join {path.vertices[i]} and {path.vertices[i + 1]}")


def validate_instance(instance: Instance) -> None:
    """Check every instance invariant, naming the first one violated."""
    n = instance.vertex_count
    if n < 1:
        raise InstanceValidationError("vertex count must be positive")
    if not instance.terminals:
        raise InstanceValidationError("terminal set is empty")
    for t in instance.terminals:
        if not 0 <= t < n:
            raise InstanceValidationError("terminal out of range", str(t))
    if instance.root not in instance.terminals:
        raise InstanceValidationError("root not terminal", str(instance.root))

    seen = set()
    for edge in instance.edges:
        if edge.id in seen:
            raise InstanceValidationError("duplicate edge id", str(edge.id))
        seen.add(edge.id)
        if not (0 <= edge.u < n and 0 <= edge.v < n):
            raise InstanceValidationError("edge endpoint out of range", f"edge {edge.id}")
        if edge.u == edge.v:
            raise InstanceValidationError("self-loop", f"edge {edge.id}")
        if edge.cost <= 0:
            raise InstanceValidationError("nonpositive cost", f"edge {edge.id}")
        if edge.u not in instance.terminals and edge.v not in instance.terminals:
            raise InstanceValidationError("quasi-bipartite violated", f"edge {edge.id} joins two nonterminals")

    # Isolated nonterminals may remain after pruning; everything else must reach the root.
    graph = instance.to_multigraph()
    component = nx.node_connected_component(graph, instance.root)
    for v in range(n):
        if v in component:
            continue
        if v in instance.terminals or graph.degree(v) > 0:
            raise InstanceValidationError("disconnected", f"vertex {v} cannot reach the root")


def build_instance(
    vertex_count: int,
    edges: Iterable[Tuple[int, int, int, RationalLike]],
    terminals: Iterable[int],
    root: int,
    labels: Optional[Mapping[int, str]] = None,
) -> Instance:
    """Assemble and validate an instance from ``(id, u, v, cost)`` tuples."""
    instance = Instance(
        vertex_count=vertex_count,
        edges=tuple(sorted((Edge(int(i), int(u), int(v), to_fraction(c)) for i, u, v, c in edges), key=lambda e: e.id)),
        terminals=frozenset(int(t) for t in terminals),
        root=int(root),
        labels=dict(labels or {}),
    )
    validate_instance(instance)
    return instance


def normalize_costs(instance: Instance) -> Tuple[Instance, Fraction]:
    """Scale all costs so the cheapest edge costs exactly 1."""
    if not instance.edges:
        return instance, Fraction(1)
    scale = 1 / min(edge.cost for edge in instance.edges)
    if scale == 1:
        return instance, Fraction(1)
    edges = tuple(replace(edge, cost=edge.cost * scale) for edge in instance.edges)
    logger.debug("Normalized %d edge costs by %s", len(edges), scale)
    return replace(instance, edges=edges), scale


def edge_class(cost: Fraction) -> EdgeClass:
    """Class alpha with 256^alpha <= cost < 256^(alpha+1)."""
    cost = Fraction(cost)
    if cost < 1:
        raise ParameterError(f"edge class is only defined for costs >= 1, got {cost}")
    klass = 0
    low = Fraction(1)
    while low * CLASS_BASE <= cost:
        low *= CLASS_BASE
        klass += 1
    return EdgeClass(klass=klass, low=low, upp=low * CLASS_BASE)


def prune_heavy_edges(instance: Instance, bound: Fraction) -> Instance:
    """Drop every edge that costs more than ``bound``."""
    kept = tuple(edge for edge in instance.edges if edge.cost <= bound)
    if len(kept) == len(instance.edges):
        return instance
    logger.info("Pruned %d edges heavier than %s", len(instance.edges) - len(kept), bound)
    pruned = replace(instance, edges=kept)
    validate_instance(pruned)
    return pruned


def gen_poa_chain(n: int, eps: RationalLike, delta: RationalLike) -> Instance:
    """Hub construction with a linear gap between the worst and best equilibrium.

    Root 0, terminals 1..n joined to hub ``n + 1`` by spokes of cost ``delta``
    (edge ids ``0..n-1``); the hub reaches the root over two parallel edges,
    id ``n`` of cost ``n`` and id ``n + 1`` of cost ``1 + eps``.
    """
    if n < 2:
        raise ParameterError(f"poa chain needs n >= 2, got {n}")
    eps, delta = to_fraction(eps), to_fraction(delta)
    if eps <= 0 or delta <= 0:
        raise ParameterError("eps and delta must be positive")
    hub = n + 1
    edges = [(i, i + 1, hub, delta) for i in range(n)]
    edges.append((n, hub, 0, Fraction(n)))
    edges.append((n + 1, hub, 0, 1 + eps))
    labels = {0: "r", hub: "hub"}
    labels.update({i: f"t{i}" for i in range(1, n + 1)})
    return build_instance(n + 2, edges, range(0, n + 1), 0, labels)


def _integer_cost_bounds(cost_range: Tuple[RationalLike, RationalLike]) -> Tuple[int, int]:
    low, high = (to_fraction(c) for c in cost_range)
    if low <= 0 or high < low:
        raise ParameterError(f"invalid cost range {cost_range}")
    lo = -(-low.numerator // low.denominator)
    hi = high.numerator // high.denominator
    if hi < lo:
        raise ParameterError(f"cost range {cost_range} contains no integer")
    return lo, hi


def gen_random_quasi_bipartite(
    n_terminals: int,
    n_nonterminals: int,
    edge_prob: float,
    cost_range: Tuple[RationalLike, RationalLike] = (1, 20),
    seed: int = 0,
    cost_classes: int = 0,
) -> Instance:
    """Seeded random quasi-bipartite instance with integer costs.

    Terminals are ``0..n_terminals-1`` with root 0; nonterminals follow.
    A random spanning backbone over the terminals keeps the graph connected.
    With ``cost_classes > 0`` costs are log-uniform over that many edge
    classes instead of uniform over ``cost_range``.
    """
    if n_terminals < 1:
        raise ParameterError("at least one terminal is required")
    if n_nonterminals < 0:
        raise ParameterError("nonterminal count must be non-negative")
    if not 0 <= edge_prob <= 1:
        raise ParameterError(f"edge probability {edge_prob} not in [0, 1]")
    if cost_classes < 0:
        raise ParameterError("cost class count must be non-negative")
    lo, hi = _integer_cost_bounds(cost_range)
    rng = np.random.default_rng(seed)

    def draw_cost() -> int:
        if cost_classes:
            return max(1, round(CLASS_BASE ** rng.uniform(0, cost_classes)))
        return int(rng.integers(lo, hi + 1))

    pairs: List[Tuple[int, int]] = []
    order = [int(t) for t in rng.permutation(n_terminals)]
    for i in range(1, n_terminals):
        pairs.append((order[i], order[int(rng.integers(0, i))]))
    for a in range(n_terminals):
        for b in range(a + 1, n_terminals):
            if rng.random() < edge_prob:
                pairs.append((a, b))

    kept_nonterminals = 0
    for w in range(n_nonterminals):
        neighbours = [t for t in range(n_terminals) if rng.random() < edge_prob]
        if len(neighbours) < 2:
            if n_terminals < 2:
                continue
            spare = [t for t in range(n_terminals) if t not in neighbours]
            picks = rng.choice(len(spare), size=2 - len(neighbours), replace=False)
            neighbours.extend(spare[int(p)] for p in picks)
        vertex = n_terminals + kept_nonterminals
        kept_nonterminals += 1
        pairs.extend((vertex, t) for t in sorted(neighbours))

    edges = [(i, u, v, draw_cost()) for i, (u, v) in enumerate(pairs)]
    instance = build_instance(n_terminals + kept_nonterminals, edges, range(n_terminals), 0)
    logger.info(
        "Generated random instance seed=%s terminals=%d nonterminals=%d edges=%d",
        seed, n_terminals, kept_nonterminals, len(edges),
    )
    return instance


def gen_broadcast(
    n_terminals: int,
    edge_prob: float,
    cost_range: Tuple[RationalLike, RationalLike] = (1, 20),
    seed: int = 0,
) -> Instance:
    """Random instance in which every vertex is a terminal."""
    return gen_random_quasi_bipartite(n_terminals, 0, edge_prob, cost_range, seed)


__all__ = [
    "CLASS_BASE",
    "Edge",
    "EdgeClass",
    "Instance",
    "Path",
    "build_instance",
    "check_path",
    "edge_class",
    "gen_broadcast",
    "gen_poa_chain",
    "gen_random_quasi_bipartite",
    "normalize_costs",
    "prune_heavy_edges",
    "validate_instance",
]
