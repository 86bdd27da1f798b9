from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Mapping, Protocol, Tuple

import networkx as nx

from utils.errors import McastError

if TYPE_CHECKING:  # pragma: no cover
    from instance import Instance


@dataclass(frozen=True)
class SteinerTree:
    """A tree spanning all terminals, rooted at the instance root.

    ``parent`` maps every non-root tree vertex to ``(parent vertex, edge id)``.
    """

    root: int
    edges: FrozenSet[int]
    total_cost: Fraction
    parent: Mapping[int, Tuple[int, int]]
    costs: Mapping[int, Fraction]

    @cached_property
    def vertices(self) -> FrozenSet[int]:
        return frozenset(self.parent) | {self.root}

    @cached_property
    def children(self) -> Dict[int, Tuple[Tuple[int, int], ...]]:
        """Vertex -> ``(child, edge id)`` pairs in ascending child order."""
        table: Dict[int, List[Tuple[int, int]]] = {v: [] for v in self.vertices}
        for child, (parent, edge_id) in self.parent.items():
            table[parent].append((child, edge_id))
        return {v: tuple(sorted(kids)) for v, kids in table.items()}

    def depth(self, vertex: int) -> int:
        d = 0
        while vertex != self.root:
            vertex = self.parent[vertex][0]
            d += 1
        return d


class SteinerSolver(Protocol):
    """Common interface for exact Steiner tree backends."""

    name: str

    def solve(self, instance: "Instance") -> SteinerTree:
        """Return a minimum-cost tree spanning every terminal."""
        raise NotImplementedError


def lexicographic_weights(instance: "Instance") -> Dict[int, int]:
    """Integer edge weights whose optimum is unique.

    Every cost is scaled to an integer and lowered by a bonus that halves
    with each step up in edge-id rank. The bonuses of any edge set sum to
    less than one unit of cost, so a minimum under these weights is a
    cheapest tree, and among cheapest trees it is the one with the
    lexicographically smallest sorted edge-id tuple.
    """
    ordered = sorted(edge.id for edge in instance.edges)
    if not ordered:
        return {}
    m = len(ordered)
    unit = math.lcm(*(instance.cost(e).denominator for e in ordered)) * 2 ** (m + 1)
    return {e: int(instance.cost(e) * unit) - 2 ** (m - 1 - rank) for rank, e in enumerate(ordered)}


def tree_from_edges(instance: "Instance", edge_ids: Iterable[int]) -> SteinerTree:
    """Reduce a connected edge set spanning the terminals to a rooted tree.

    Kruskal over ``(cost, edge id)`` removes cycles, which keeps the
    spanning tree with the smallest sorted edge ids among the cheapest
    ones; nonterminal leaves are then pruned until every leaf is a terminal.
    """
    edges = sorted((instance.edge_by_id[e] for e in set(edge_ids)), key=lambda e: (e.cost, e.id))
    forest = nx.MultiGraph()
    forest.add_node(instance.root)
    components = nx.utils.UnionFind()
    for edge in edges:
        forest.add_nodes_from(edge.endpoints)
        if components[edge.u] != components[edge.v]:
            components.union(edge.u, edge.v)
            forest.add_edge(edge.u, edge.v, key=edge.id)

    leaves = deque(v for v in forest.nodes if forest.degree(v) <= 1 and v not in instance.terminals)
    while leaves:
        v = leaves.popleft()
        if v not in forest:
            continue
        neighbours = list(forest.neighbors(v))
        forest.remove_node(v)
        for w in neighbours:
            if forest.degree(w) <= 1 and w not in instance.terminals:
                leaves.append(w)

    parent: Dict[int, Tuple[int, int]] = {}
    seen = {instance.root}
    queue = deque([instance.root])
    while queue:
        x = queue.popleft()
        for y, keys in sorted(forest[x].items()):
            if y in seen:
                continue
            seen.add(y)
            parent[y] = (x, min(keys))
            queue.append(y)

    missing = sorted(t for t in instance.terminals if t not in seen)
    if missing:
        raise McastError(f"edge set does not connect terminals {missing} to the root")
    stray = [v for v in forest.nodes if v not in seen]
    if stray:
        raise McastError(f"edge set leaves vertices {stray} outside the root component")

    tree_edges = frozenset(edge_id for _, edge_id in parent.values())
    return SteinerTree(
        root=instance.root,
        edges=tree_edges,
        total_cost=instance.total_cost(tree_edges),
        parent=parent,
        costs={e: instance.cost(e) for e in tree_edges},
    )


__all__ = ["SteinerSolver", "SteinerTree", "lexicographic_weights", "tree_from_edges"]
