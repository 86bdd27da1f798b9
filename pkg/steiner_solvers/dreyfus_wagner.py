"""Dreyfus-Wagner dynamic program over subsets of terminals."""

from __future__ import annotations

import logging
from typing import Dict, List, Set, Tuple

import networkx as nx

from instance import Instance
from steiner_solvers.base import SteinerTree, lexicographic_weights, tree_from_edges
from utils.errors import CapExceededError

logger = logging.getLogger(__name__)


def _submasks_with_lowest_bit(mask: int):
    """Proper submasks of ``mask`` that contain its lowest set bit."""
    low = mask & -mask
    rest = mask ^ low
    sub = rest
    while True:
        candidate = sub | low
        if candidate != mask:
            yield candidate
        if sub == 0:
            return
        sub = (sub - 1) & rest


class DreyfusWagnerSolver:
    """Exact Steiner trees in time exponential in the terminal count.

    The program runs on lexicographic weights, so its optimum is the cheapest
    tree with the smallest sorted edge-id tuple, the same one the brute-force
    oracle keeps.
    """

    name = "dreyfus-wagner"

    def __init__(self, terminal_cap: int = 14):
        self.terminal_cap = terminal_cap

    def solve(self, instance: Instance) -> SteinerTree:
        if len(instance.terminals) > self.terminal_cap:
            raise CapExceededError("terminal count", len(instance.terminals), self.terminal_cap)
        terminals = [t for t in sorted(instance.terminals) if t != instance.root]
        if not terminals:
            return tree_from_edges(instance, [])

        weights = lexicographic_weights(instance)
        # Metric closure over the lightest edge between each vertex pair.
        graph = nx.Graph()
        graph.add_nodes_from(range(instance.vertex_count))
        for edge in sorted(instance.edges, key=lambda e: e.id):
            current = graph.get_edge_data(edge.u, edge.v)
            if current is None or weights[edge.id] < current["weight"]:
                graph.add_edge(edge.u, edge.v, weight=weights[edge.id], eid=edge.id)
        dist: Dict[int, Dict[int, int]] = {}
        routes: Dict[int, Dict[int, List[int]]] = {}
        for source, (lengths, paths) in nx.all_pairs_dijkstra(graph, weight="weight"):
            dist[source] = lengths
            routes[source] = paths

        vertices = sorted(dist[instance.root])
        k = len(terminals)
        full = (1 << k) - 1
        dp: List[Dict[int, int]] = [dict() for _ in range(full + 1)]
        via_vertex: List[Dict[int, int]] = [dict() for _ in range(full + 1)]
        via_split: List[Dict[int, int]] = [dict() for _ in range(full + 1)]

        for i, t in enumerate(terminals):
            dp[1 << i] = {v: dist[t][v] for v in vertices}

        for mask in range(1, full + 1):
            if mask & (mask - 1) == 0:
                continue
            merged: Dict[int, int] = {}
            for v in vertices:
                best = None
                for sub in _submasks_with_lowest_bit(mask):
                    candidate = dp[sub][v] + dp[mask ^ sub][v]
                    if best is None or candidate < best:
                        best = candidate
                        via_split[mask][v] = sub
                merged[v] = best
            table = dp[mask]
            for v in vertices:
                best_u = None
                best = None
                for u in vertices:
                    candidate = merged[u] + dist[u][v]
                    if best is None or candidate < best:
                        best, best_u = candidate, u
                table[v] = best
                via_vertex[mask][v] = best_u

        def route_edges(a: int, b: int) -> Set[int]:
            hops = routes[a][b]
            return {graph[x][y]["eid"] for x, y in zip(hops, hops[1:])}

        chosen: Set[int] = set()
        stack: List[Tuple[int, int]] = [(full, instance.root)]
        while stack:
            mask, v = stack.pop()
            if mask & (mask - 1) == 0:
                chosen |= route_edges(terminals[mask.bit_length() - 1], v)
                continue
            u = via_vertex[mask][v]
            chosen |= route_edges(u, v)
            sub = via_split[mask][u]
            stack.append((sub, u))
            stack.append((mask ^ sub, u))

        tree = tree_from_edges(instance, chosen)
        logger.debug("Dreyfus-Wagner optimum %s over %d terminals", tree.total_cost, k)
        return tree


__all__ = ["DreyfusWagnerSolver"]
