from steiner_solvers.base import SteinerSolver, SteinerTree, tree_from_edges
from steiner_solvers.brute_force import BruteForceSolver
from steiner_solvers.dreyfus_wagner import DreyfusWagnerSolver

__all__ = [
    "BruteForceSolver",
    "DreyfusWagnerSolver",
    "SteinerSolver",
    "SteinerTree",
    "tree_from_edges",
]
