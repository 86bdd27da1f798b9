import os
import sys
from fractions import Fraction

import pytest

# Ensure project root is on PYTHONPATH for tests
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

# Quiet defaults; individual tests override these with ``monkeypatch``.
os.environ.setdefault("MCAST_POS_LOG", "quiet")
os.environ.setdefault("MCAST_POS_GUARD", "1000000")

from instance import build_instance, gen_poa_chain  # noqa: E402
from steiner import build_opt_structures, exact_steiner  # noqa: E402


@pytest.fixture(autouse=True)
def clean_run_env(monkeypatch):
    """Keep a developer's shell settings out of the config under test."""
    for name in ("MCAST_POS_ABSORB_ORDER", "MCAST_POS_FORMAT", "MCAST_POS_OUT"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("MCAST_POS_GUARD", "1000000")


@pytest.fixture
def triangle():
    """Root 0, terminals 1 and 2; T* = {0, 1} with cost 4."""
    return build_instance(3, [(0, 1, 0, 3), (1, 2, 1, 1), (2, 2, 0, 4)], [0, 1, 2], 0)


@pytest.fixture
def chain():
    """Broadcast path 0-1-2-3 plus two expensive shortcuts; T* = {0, 1, 2}."""
    return build_instance(
        4,
        [(0, 1, 0, 2), (1, 2, 1, 1), (2, 3, 2, 1), (3, 2, 0, 6), (4, 3, 0, 8)],
        [0, 1, 2, 3],
        0,
    )


@pytest.fixture
def hub_pair():
    """Nonterminal 3 between terminal 1 and the root, sigma edge 2 to terminal 2.

    T* = {3, 4}; the off-tree route 1-3-0 uses edges 0 (cost 1280) and 1 (cost 2304).
    """
    return build_instance(
        4,
        [(0, 1, 3, 1280), (1, 3, 0, 2304), (2, 2, 3, 1), (3, 1, 0, 2), (4, 2, 0, 2)],
        [0, 1, 2],
        0,
    )


@pytest.fixture
def fig1():
    return gen_poa_chain(4, Fraction(1, 2), Fraction(1, 100))


@pytest.fixture
def opt_for():
    def build(instance):
        return build_opt_structures(instance, exact_steiner(instance))
    return build
