"""Exhaustive Steiner oracle for small instances."""

from __future__ import annotations

import itertools
import logging
from typing import Optional, Tuple

import networkx as nx

from instance import Instance
from steiner_solvers.base import SteinerTree, tree_from_edges
from utils.errors import CapExceededError

logger = logging.getLogger(__name__)


class BruteForceSolver:
    """Tries every set of Steiner vertices and keeps the cheapest spanning tree.

    Each subset is spanned by Kruskal over ``(cost, edge id)``, so among
    optimal trees the one with the smallest sorted edge-id tuple wins.
    """

    name = "brute-force"

    def __init__(self, edge_cap: int = 20):
        self.edge_cap = edge_cap

    def solve(self, instance: Instance) -> SteinerTree:
        if len(instance.edges) > self.edge_cap:
            raise CapExceededError("edge count", len(instance.edges), self.edge_cap)
        candidates = [v for v in instance.nonterminals if instance.incident[v]]
        best: Optional[Tuple] = None
        best_tree: Optional[SteinerTree] = None

        for size in range(len(candidates) + 1):
            for steiner_vertices in itertools.combinations(candidates, size):
                allowed = set(instance.terminals) | set(steiner_vertices)
                inside = [edge for edge in instance.edges if edge.u in allowed and edge.v in allowed]
                graph = nx.MultiGraph()
                graph.add_nodes_from(allowed)
                graph.add_edges_from((edge.u, edge.v, edge.id) for edge in inside)
                if not nx.is_connected(graph):
                    continue
                tree = tree_from_edges(instance, [edge.id for edge in inside])
                key = (tree.total_cost, tuple(sorted(tree.edges)))
                if best is None or key < best:
                    best, best_tree = key, tree

        assert best_tree is not None  # the full vertex set is connected
        logger.debug("Brute-force optimum %s", best_tree.total_cost)
        return best_tree


__all__ = ["BruteForceSolver"]
