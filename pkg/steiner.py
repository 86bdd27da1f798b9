"""Optimal structures the dynamics is anchored to.

The minimum Steiner tree T*, its Euler tour (the main cycle), the
cheapest-edge map for nonterminals and the extended metric built from
both, plus the budgeted intervals the neighborhoods are cut from.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx

from instance import CLASS_BASE, Instance, Path, edge_class
from steiner_solvers import BruteForceSolver, DreyfusWagnerSolver, SteinerSolver, SteinerTree
from utils.errors import McastError
from utils.rational import harmonic_sq

logger = logging.getLogger(__name__)

DEFAULT_TERMINAL_CAP = 14
DEFAULT_EDGE_CAP = 20


def exact_steiner(instance: Instance, terminal_cap: int = DEFAULT_TERMINAL_CAP,
                  solver: Optional[SteinerSolver] = None) -> SteinerTree:
    solver = solver or DreyfusWagnerSolver(terminal_cap)
    tree = solver.solve(instance)
    logger.info("Steiner tree via %s: %d edges, cost %s", solver.name, len(tree.edges), tree.total_cost)
    return tree


def brute_force_steiner(instance: Instance, edge_cap: int = DEFAULT_EDGE_CAP) -> SteinerTree:
    return BruteForceSolver(edge_cap).solve(instance)


def tree_path(tree: SteinerTree, x: int, y: int) -> Path:
    """The unique path from ``x`` to ``y`` inside ``tree``."""
    for vertex in (x, y):
        if vertex not in tree.vertices:
            raise McastError(f"vertex {vertex} is not in the Steiner tree")

    def climb(v: int) -> List[int]:
        chain = [v]
        while v != tree.root:
            v = tree.parent[v][0]
            chain.append(v)
        return chain

    up_x, up_y = climb(x), climb(y)
    on_y = set(up_y)
    meet = next(v for v in up_x if v in on_y)
    down = up_y[: up_y.index(meet) + 1]
    vertices = up_x[: up_x.index(meet) + 1] + list(reversed(down[:-1]))
    edges = []
    for a, b in zip(vertices, vertices[1:]):
        edges.append(tree.parent[a][1] if tree.parent.get(a, (None,))[0] == b else tree.parent[b][1])
    return Path(tuple(vertices), tuple(edges))


@dataclass(frozen=True)
class MainCycle:
    """Closed Euler tour of T*: step ``i`` walks edge ``edges[i]`` from
    ``vertices[i]`` to ``vertices[i + 1]``, and ``vertices[-1] == vertices[0]``."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]
    costs: Mapping[int, Fraction]

    @property
    def length(self) -> int:
        return len(self.edges)

    @cached_property
    def positions(self) -> Dict[int, Tuple[int, ...]]:
        table: Dict[int, List[int]] = {}
        for i, v in enumerate(self.vertices[:-1] if self.edges else self.vertices):
            table.setdefault(v, []).append(i)
        return {v: tuple(idx) for v, idx in table.items()}

    def first_index(self, vertex: int) -> int:
        try:
            return self.positions[vertex][0]
        except KeyError:
            raise McastError(f"vertex {vertex} is not on the main cycle") from None

    def edge_at(self, index: int) -> int:
        return self.edges[index % self.length]

    def vertex_at(self, index: int) -> int:
        return self.vertices[index % self.length] if self.length else self.vertices[0]

    def walk(self, start: int, count: int, step: int = 1) -> Tuple[int, ...]:
        """Edge ids of ``count`` consecutive steps from index ``start``."""
        if step > 0:
            return tuple(self.edge_at(start + k) for k in range(count))
        return tuple(self.edge_at(start - 1 - k) for k in range(count))


def main_cycle(tree: SteinerTree) -> MainCycle:
    """Euler tour from the root, children in ascending vertex id."""
    vertices = [tree.root]
    edges: List[int] = []
    stack = [(tree.root, iter(tree.children[tree.root]))]
    while stack:
        v, kids = stack[-1]
        step = next(kids, None)
        if step is None:
            stack.pop()
            if stack:
                edges.append(tree.parent[v][1])
                vertices.append(stack[-1][0])
            continue
        child, edge_id = step
        edges.append(edge_id)
        vertices.append(child)
        stack.append((child, iter(tree.children[child])))
    return MainCycle(tuple(vertices), tuple(edges), dict(tree.costs))


@dataclass(frozen=True)
class SigmaMap:
    """Cheapest incident edge per nonterminal (ties by edge id)."""

    edge: Mapping[int, int]
    terminal: Mapping[int, int]
    inflated_cost: Dict[int, Fraction] = field(default_factory=dict)

    def __contains__(self, vertex: object) -> bool:
        return vertex in self.edge

    def path(self, w: int) -> Path:
        """``w -> t_w`` over the sigma edge."""
        return Path((w, self.terminal[w]), (self.edge[w],))


def sigma_edges(instance: Instance) -> SigmaMap:
    edges: Dict[int, int] = {}
    terminals: Dict[int, int] = {}
    for v in instance.nonterminals:
        incident = instance.incident[v]
        if not incident:
            continue
        best = min(incident, key=lambda e: (e.cost, e.id))
        edges[v] = best.id
        terminals[v] = best.other(v)
    return SigmaMap(edges, terminals)


def side_cost(counts: Mapping[int, int]) -> Fraction:
    """2 * sum over classes of 256^(alpha+1) * H_n^2."""
    return 2 * sum(
        (Fraction(CLASS_BASE) ** (klass + 1) * harmonic_sq(n) for klass, n in counts.items() if n),
        Fraction(0),
    )


@dataclass(frozen=True)
class Interval:
    """Budgeted stretch of the main cycle around ``anchor``.

    ``right`` and ``left`` hold main-cycle step indices, nearest first.
    """

    anchor: int
    budget: Fraction
    anchor_index: int
    right: Tuple[int, ...]
    left: Tuple[int, ...]
    right_counts: Mapping[int, int]
    left_counts: Mapping[int, int]
    cycle_length: int

    @property
    def right_is_whole_cycle(self) -> bool:
        return self.cycle_length > 0 and len(self.right) == self.cycle_length

    @property
    def left_is_whole_cycle(self) -> bool:
        return self.cycle_length > 0 and len(self.left) == self.cycle_length


def _grow_side(mc: MainCycle, anchor_index: int, step: int, budget: Fraction) -> Tuple[Tuple[int, ...], Counter]:
    taken: List[int] = []
    counts: Counter = Counter()
    while len(taken) < mc.length:
        if step > 0:
            index = (anchor_index + len(taken)) % mc.length
        else:
            index = (anchor_index - 1 - len(taken)) % mc.length
        klass = edge_class(mc.costs[mc.edges[index]]).klass
        counts[klass] += 1
        if side_cost(counts) > budget:
            counts[klass] -= 1
            break
        taken.append(index)
    return tuple(taken), +counts


def interval(mc: MainCycle, anchor: int, y: Fraction) -> Interval:
    """Maximal stretch on each side of ``anchor`` whose side cost fits ``y``."""
    anchor_index = mc.first_index(anchor)
    right, right_counts = _grow_side(mc, anchor_index, 1, y)
    left, left_counts = _grow_side(mc, anchor_index, -1, y)
    return Interval(anchor, Fraction(y), anchor_index, right, left, dict(right_counts), dict(left_counts), mc.length)


def interval_vertices(mc: MainCycle, iv: Interval) -> Tuple[int, ...]:
    """Vertices covered by ``iv`` in main-cycle order, left to right, each once."""
    if mc.length == 0:
        return (iv.anchor,)
    ordered = [mc.vertex_at(iv.anchor_index - k) for k in range(len(iv.left), 0, -1)]
    ordered.append(iv.anchor)
    ordered.extend(mc.vertex_at(iv.anchor_index + k) for k in range(1, len(iv.right) + 1))
    return tuple(dict.fromkeys(ordered))


def right_vertices(mc: MainCycle, iv: Interval) -> Tuple[int, ...]:
    if mc.length == 0:
        return (iv.anchor,)
    return tuple(dict.fromkeys(mc.vertex_at(iv.anchor_index + k) for k in range(len(iv.right) + 1)))


@dataclass(frozen=True)
class OptStructures:
    """T*, its main cycle and sigma edges, with the extended metric T+ on top."""

    instance: Instance
    tree: SteinerTree
    cycle: MainCycle
    sigma: SigmaMap

    def in_tree(self, v: int) -> bool:
        return v in self.tree.vertices

    def anchor(self, v: int) -> int:
        if self.in_tree(v):
            return v
        if v not in self.sigma:
            raise McastError(f"vertex {v} is neither in T* nor attached by a sigma edge")
        return self.sigma.terminal[v]

    def tree_path(self, x: int, y: int) -> Path:
        return tree_path(self.tree, x, y)

    def tplus_path(self, x: int, y: int) -> Path:
        """Path between ``x`` and ``y`` in T+: sigma hops for off-tree vertices around a T* path."""
        if x == y:
            return Path.trivial(x)
        path = self.tree_path(self.anchor(x), self.anchor(y))
        if not self.in_tree(x):
            path = self.sigma.path(x).concat(path)
        if not self.in_tree(y):
            path = path.concat(self.sigma.path(y).reversed())
        return path

    @cached_property
    def tplus_edges(self) -> frozenset:
        extra = {self.sigma.edge[w] for w in self.sigma.edge if not self.in_tree(w)}
        return frozenset(self.tree.edges) | extra

    @cached_property
    def _tplus_adjacency(self) -> Dict[int, Dict[int, int]]:
        table: Dict[int, Dict[int, int]] = {}
        for v, (p, edge_id) in self.tree.parent.items():
            table.setdefault(v, {})[p] = edge_id
            table.setdefault(p, {})[v] = edge_id
        for w, edge_id in self.sigma.edge.items():
            if not self.in_tree(w):
                t = self.sigma.terminal[w]
                table.setdefault(w, {})[t] = edge_id
                table.setdefault(t, {})[w] = edge_id
        return table

    def tplus_edge(self, x: int, y: int) -> Optional[int]:
        return self._tplus_adjacency.get(x, {}).get(y)

    def tplus_neighbors(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(self._tplus_adjacency.get(v, {})))

    @cached_property
    def tree_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.tree.vertices)
        for v, (p, edge_id) in self.tree.parent.items():
            graph.add_edge(v, p, eid=edge_id)
        return graph

    def bfs_order(self, source: int) -> Tuple[int, ...]:
        """Breadth-first order over T* from ``source``, neighbors ascending."""
        return (source,) + tuple(v for _, v in nx.bfs_edges(self.tree_graph, source, sort_neighbors=sorted))


def build_opt_structures(instance: Instance, tree: SteinerTree) -> OptStructures:
    return OptStructures(instance, tree, main_cycle(tree), sigma_edges(instance))


__all__ = [
    "DEFAULT_EDGE_CAP",
    "DEFAULT_TERMINAL_CAP",
    "Interval",
    "MainCycle",
    "OptStructures",
    "SigmaMap",
    "SteinerTree",
    "brute_force_steiner",
    "build_opt_structures",
    "exact_steiner",
    "interval",
    "interval_vertices",
    "main_cycle",
    "right_vertices",
    "side_cost",
    "sigma_edges",
    "tree_path",
]
