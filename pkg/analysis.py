"""Equilibrium quality, brute-force oracles and the cost-charging audit.

The audit runs after the dynamics, on the final state and the trace.
Every non-T* edge of the final tree is accounted for exactly once: cheap
sigma-backed edges (E_sigma) are charged to the edge entering their child,
edges removed while building E* are charged to a surviving neighbor, and
the survivors are charged to T* edges of their right interval.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from typing import Dict, List, Optional, Tuple, Union

import networkx as nx
from pydantic import BaseModel, Field

from dynamics import RunResult, Trace
from game import State, is_nash
from instance import CLASS_BASE, Instance, Path, edge_class
from steiner import Interval, OptStructures, SteinerTree, exact_steiner, interval
from utils.errors import AuditFailure, CapExceededError
from utils.rational import format_rational, harmonic_sq

logger = logging.getLogger(__name__)

SIGMA_RATIO = 64
CASE_ONE_FACTOR = 2 * CLASS_BASE**3
WHOLE_CYCLE_FACTOR = 2
MAX_DROPS_PER_SURVIVOR = 2
TAYLOR_TERMS = 40
SERIES_CUTOFF = Fraction(1, 2**64)
WHOLE_CYCLE_TARGET = "T*"

LedgerKey = Union[int, str]


class RationalModel(BaseModel):
    """Exact rational plus a float for people reading the JSON."""

    num: int
    den: int = 1
    approx: float = 0.0

    @classmethod
    def of(cls, value: Fraction) -> "RationalModel":
        value = Fraction(value)
        return cls(num=value.numerator, den=value.denominator, approx=float(value))

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    def __str__(self) -> str:
        return format_rational(self.to_fraction())


class SigmaCharge(BaseModel):
    edge: int
    target: int
    ratio: RationalModel


class DropCharge(BaseModel):
    edge: int
    target: int
    rule: str


class OverlapVerdict(BaseModel):
    klass: int
    edges: List[int]
    pairs_checked: int
    disjoint: bool = True


class LedgerEntry(BaseModel):
    case: str
    total: RationalModel
    cost: RationalModel
    ratio: RationalModel
    limit: RationalModel


class AuditReport(BaseModel):
    """Everything one audited run reports; the JSON artifact mirrors it."""

    instance: str = ""
    seed: int = 0
    n: int
    players: int
    terminals: int
    opt_cost: RationalModel
    final_cost: RationalModel
    pos_ratio: RationalModel
    moves: int = 0
    critical_moves: int = 0
    e_sigma: List[int] = Field(default_factory=list)
    sigma_charges: List[SigmaCharge] = Field(default_factory=list)
    drops: List[DropCharge] = Field(default_factory=list)
    e_star: List[int] = Field(default_factory=list)
    inflation: Dict[int, RationalModel] = Field(default_factory=dict)
    overlap_verdicts: List[OverlapVerdict] = Field(default_factory=list)
    charge_ledger: Dict[str, LedgerEntry] = Field(default_factory=dict)
    conservation: bool = True
    case_two_constant: RationalModel
    implied_bound: RationalModel
    bound_respected: bool = True
    annotations: List[str] = Field(default_factory=list)
    audit_pass: bool = True


def pos_ratio(final: State, tree: SteinerTree) -> Fraction:
    """c(S_f) / c(T*), exact; the final state has to be an equilibrium."""
    verdict = is_nash(final)
    if not verdict:
        raise AuditFailure("pos-ratio", f"final state is not Nash: terminal {verdict.terminal} can improve")
    if tree.total_cost == 0:
        return Fraction(1)
    ratio = final.cost / tree.total_cost
    if ratio < 1:
        raise AuditFailure("pos-ratio", f"equilibrium cheaper than the Steiner optimum: {ratio}")
    return ratio


@dataclass
class EquilibriumCatalog:
    equilibria: List[Tuple[Dict[int, Path], Fraction]]
    opt_cost: Fraction
    profiles: int

    @property
    def min_cost(self) -> Fraction:
        return min(cost for _, cost in self.equilibria)

    @property
    def max_cost(self) -> Fraction:
        return max(cost for _, cost in self.equilibria)

    @property
    def costs(self) -> Tuple[Fraction, ...]:
        return tuple(sorted({cost for _, cost in self.equilibria}))

    def _ratio(self, cost: Fraction) -> Fraction:
        return cost / self.opt_cost if self.opt_cost else Fraction(1)

    @property
    def pos(self) -> Fraction:
        return self._ratio(self.min_cost)

    @property
    def poa(self) -> Fraction:
        return self._ratio(self.max_cost)


def _simple_paths(graph: nx.MultiGraph, instance: Instance, u: int, cap: int) -> List[Path]:
    paths = []
    for edge_path in nx.all_simple_edge_paths(graph, u, instance.root):
        paths.append(instance.walk(u, [key for _, _, key in edge_path]))
        if len(paths) > cap:
            raise CapExceededError(f"simple paths of terminal {u}", len(paths), cap)
    paths.sort(key=lambda p: (len(p), p.edges))
    return paths


def enumerate_nash(instance: Instance, profile_cap: int = 10**6) -> EquilibriumCatalog:
    """All pure equilibria over every combination of simple terminal-root paths."""
    graph = instance.to_multigraph()
    players = instance.players
    choices = [_simple_paths(graph, instance, u, profile_cap) for u in players]
    size = math.prod(len(c) for c in choices)
    if size > profile_cap:
        raise CapExceededError("profile count", size, profile_cap)

    equilibria = []
    for combo in product(*choices):
        state = State(instance, dict(zip(players, combo)))
        if is_nash(state):
            equilibria.append((state.paths, state.cost))
    opt = exact_steiner(instance).total_cost
    logger.info("Enumerated %d profiles, %d equilibria", size, len(equilibria))
    return EquilibriumCatalog(equilibria, opt, size)


def _child_of(final: State) -> Dict[int, int]:
    """Edge id -> the endpoint that forwards over it in the final tree."""
    child = {}
    for v, hops in final.next_hops().items():
        for edge_id in hops:
            child[edge_id] = v
    return child


@dataclass
class SigmaAudit:
    members: Tuple[int, ...]
    charges: Dict[int, int]
    ratios: Dict[int, Fraction]


def audit_e_sigma(final: State, trace: Trace, opt: OptStructures) -> SigmaAudit:
    """E_sigma and its charges to the edge entering the member's child."""
    instance = final.instance
    child = _child_of(final)
    entering: Dict[int, List[Tuple[int, int]]] = {}
    for edge_id, v in child.items():
        head = instance.edge_by_id[edge_id].other(v)
        entering.setdefault(head, []).append((v, edge_id))

    members = []
    charges: Dict[int, int] = {}
    ratios: Dict[int, Fraction] = {}
    charged: Dict[int, int] = {}
    for edge_id in sorted(final.edges - opt.tree.edges):
        v = child[edge_id]
        if instance.is_terminal(v) or v not in opt.sigma:
            continue
        low = edge_class(instance.cost(edge_id)).low
        if low / SIGMA_RATIO > instance.cost(opt.sigma.edge[v]):
            continue
        members.append(edge_id)
        below = sorted(entering.get(v, []))
        if not below:
            raise AuditFailure("e-sigma-leaf", f"nonterminal {v} forwards over {edge_id} but nothing enters it")
        target = below[0][1]
        if instance.cost(edge_id) > SIGMA_RATIO * instance.cost(target):
            raise AuditFailure("e-sigma-ratio", f"c({edge_id})={instance.cost(edge_id)} > 64 * c({target})")
        if target in charged:
            raise AuditFailure("e-sigma-double", f"edge {target} charged by {charged[target]} and {edge_id}")
        charged[target] = edge_id
        charges[edge_id] = target
        ratios[edge_id] = instance.cost(edge_id) / instance.cost(target)
    logger.debug("E_sigma: %s", members)
    return SigmaAudit(tuple(members), charges, ratios)


@dataclass
class EStar:
    edges: Tuple[int, ...]
    drops: Dict[int, Tuple[int, str]] = field(default_factory=dict)
    inflation: Dict[int, Fraction] = field(default_factory=dict)

    def charge_cost(self, instance: Instance, edge_id: int) -> Fraction:
        return self.inflation.get(edge_id, instance.cost(edge_id))


def _added_by(trace: Trace, edge_id: int, index: int) -> bool:
    origin = trace.edge_origin.get(edge_id)
    return origin is not None and origin.kind == "critical" and origin.index == index


def build_e_star(final: State, trace: Trace, opt: OptStructures, e_sigma: SigmaAudit) -> EStar:
    instance = final.instance
    remaining = set(final.edges - opt.tree.edges - set(e_sigma.members))
    drops: Dict[int, Tuple[int, str]] = {}

    for v in instance.nonterminals:
        if v not in opt.sigma or opt.sigma.edge[v] not in remaining:
            continue
        adjacent = sorted(e.id for e in instance.incident[v] if e.id in remaining)
        if len(adjacent) < 2:
            continue
        sigma_edge = opt.sigma.edge[v]
        target = next(e for e in adjacent if e != sigma_edge)
        remaining.discard(sigma_edge)
        drops[sigma_edge] = (target, "sigma-neighbor")

    for event in trace.critical_events:
        e_u, e_v = event.e_a, event.e_b
        if e_u is None or e_v is None or e_u not in remaining or e_v not in remaining:
            continue
        if not all(_added_by(trace, e, event.index) for e in (e_u, e_v)):
            continue
        if instance.cost(e_u) <= instance.cost(e_v):
            dropped, kept = e_u, e_v
        else:
            dropped, kept = e_v, e_u
        remaining.discard(dropped)
        drops[dropped] = (kept, "critical-pair")

    def resolve(edge_id: int) -> int:
        while edge_id in drops:
            edge_id = drops[edge_id][0]
        return edge_id

    drops = {e: (resolve(t), rule) for e, (t, rule) in drops.items()}
    absorbed = Counter(t for t, _ in drops.values())
    for survivor, count in absorbed.items():
        if count > MAX_DROPS_PER_SURVIVOR:
            raise AuditFailure("e-star-drops", f"edge {survivor} absorbs {count} dropped edges")

    inflation = _sigma_inflation(final, trace, opt, remaining)
    return EStar(tuple(sorted(remaining)), drops, inflation)


def _sigma_inflation(final: State, trace: Trace, opt: OptStructures, survivors) -> Dict[int, Fraction]:
    """Sigma edges that never got a main loop take the cost of the edge they replaced."""
    instance = final.instance
    owner = {e: w for w, e in opt.sigma.edge.items() if not opt.in_tree(w)}
    looped = {run.edge for run in trace.main_loop_runs}
    inflation = {}
    for edge_id in sorted(survivors):
        w = owner.get(edge_id)
        origin = trace.edge_origin.get(edge_id)
        if w is None:
            continue
        if origin is None or origin.kind != "sigma" or edge_id in looped:
            continue
        event = next((ev for ev in trace.sigma_events if ev.index == origin.index and ev.sigma_edge == edge_id), None)
        if event is None:
            raise AuditFailure("sigma-context", f"no record of {edge_id} entering the state for {w}")
        if event.prior_cost is None:
            continue
        inflation[edge_id] = max(instance.cost(edge_id), event.prior_cost)
    return inflation


def _right_interval(final: State, opt: OptStructures, e_star: EStar, edge_id: int) -> Tuple[int, Interval]:
    v = _child_of(final)[edge_id]
    klass = edge_class(e_star.charge_cost(final.instance, edge_id))
    iv = interval(opt.cycle, opt.anchor(v), klass.low / 56)
    return klass.klass, iv


def audit_overlap(final: State, opt: OptStructures, e_star: EStar) -> List[OverlapVerdict]:
    """Same-class E* edges have disjoint right intervals."""
    by_class: Dict[int, List[Tuple[int, frozenset]]] = {}
    for edge_id in e_star.edges:
        klass, iv = _right_interval(final, opt, e_star, edge_id)
        by_class.setdefault(klass, []).append((edge_id, frozenset(iv.right)))

    verdicts = []
    for klass in sorted(by_class):
        group = by_class[klass]
        checked = 0
        for (e_u, right_u), (e_v, right_v) in combinations(group, 2):
            checked += 1
            if right_u & right_v:
                raise AuditFailure(
                    "overlap",
                    f"class {klass}: right intervals of {e_u} and {e_v} share steps {sorted(right_u & right_v)}",
                )
        verdicts.append(OverlapVerdict(klass=klass, edges=[e for e, _ in group], pairs_checked=checked))
    return verdicts


def _taylor_exp_upper(x: Fraction, terms: int = TAYLOR_TERMS) -> Fraction:
    """Rational upper bound on e^x."""
    if x >= 0:
        if x > 1:
            raise ValueError("upper bound is only set up for 0 <= x <= 1")
        partial = sum((x**k / math.factorial(k) for k in range(terms + 1)), Fraction(0))
        return partial + 3 * x ** (terms + 1) / math.factorial(terms + 1)
    y = -x
    return 1 / sum((y**k / math.factorial(k) for k in range(terms + 1)), Fraction(0))


@lru_cache(maxsize=None)
def case_two_constant() -> Fraction:
    """Certified rational upper bound on 2 * sum_z 256^(z+3) * e^(1 - 4^(z-2))."""
    total = Fraction(0)
    z = 0
    while True:
        term = Fraction(CLASS_BASE) ** (z + 3) * _taylor_exp_upper(1 - Fraction(4) ** (z - 2))
        total += term
        if z >= 3 and term < SERIES_CUTOFF:
            # later terms shrink by more than half each step
            total += term
            break
        z += 1
    return 2 * total


def implied_bound() -> Fraction:
    return 65 * (1 + 3 * (CASE_ONE_FACTOR + case_two_constant() + 2))


def _heavy_class(counts: Dict[int, int], alpha: int) -> Optional[int]:
    for beta in range(alpha - 2, 0, -1):
        n_beta = counts.get(beta, 0)
        if not n_beta:
            continue
        weight = Fraction(CLASS_BASE) ** (beta + 1) * harmonic_sq(n_beta) * Fraction(16) ** (alpha - beta)
        if weight >= Fraction(CLASS_BASE) ** (alpha - 1):
            return beta
    return None


@dataclass
class Ledger:
    totals: Dict[LedgerKey, Fraction] = field(default_factory=dict)
    cases: Dict[LedgerKey, str] = field(default_factory=dict)

    def add(self, target: LedgerKey, amount: Fraction, case: str) -> None:
        self.totals[target] = self.totals.get(target, Fraction(0)) + amount
        self.cases.setdefault(target, case)

    @property
    def total(self) -> Fraction:
        return sum(self.totals.values(), Fraction(0))


def charge_to_neighborhood(final: State, opt: OptStructures, e_star: EStar) -> Ledger:
    instance = final.instance
    mc = opt.cycle
    ledger = Ledger()
    for edge_id in e_star.edges:
        amount = instance.cost(edge_id)
        alpha, iv = _right_interval(final, opt, e_star, edge_id)
        if iv.right_is_whole_cycle:
            ledger.add(WHOLE_CYCLE_TARGET, amount, "whole-cycle")
            continue
        boundary = mc.edge_at(iv.anchor_index + len(iv.right))
        mu = edge_class(instance.cost(boundary)).klass
        if mu >= alpha - 1:
            ledger.add(boundary, amount, "boundary")
            continue
        beta = _heavy_class(iv.right_counts, alpha)
        if beta is None:
            raise AuditFailure(
                "heavy-class",
                f"edge {edge_id} (class {alpha}) has no heavy class in {dict(sorted(iv.right_counts.items()))}",
            )
        steps = [i for i in iv.right if edge_class(instance.cost(mc.edges[i])).klass == beta]
        share = amount / len(steps)
        for i in steps:
            ledger.add(mc.edges[i], share, "heavy-class")
    return ledger


def _limit(instance: Instance, tree: SteinerTree, target: LedgerKey, case: str) -> Tuple[Fraction, Fraction]:
    if target == WHOLE_CYCLE_TARGET:
        return tree.total_cost, WHOLE_CYCLE_FACTOR * tree.total_cost
    cost = instance.cost(target)
    factor = CASE_ONE_FACTOR if case == "boundary" else case_two_constant()
    return cost, factor * cost


def audit_run(result: RunResult, name: str = "", seed: int = 0) -> AuditReport:
    """Full audit of a finished run; raises :class:`AuditFailure` on the first violated check."""
    final, trace, opt = result.final, result.trace, result.opt
    instance = final.instance
    try:
        ratio = pos_ratio(final, opt.tree)
        sigma_audit = audit_e_sigma(final, trace, opt)
        e_star = build_e_star(final, trace, opt, sigma_audit)
        verdicts = audit_overlap(final, opt, e_star)
        ledger = charge_to_neighborhood(final, opt, e_star)

        entries = {}
        for target, total in sorted(ledger.totals.items(), key=lambda kv: str(kv[0])):
            case = ledger.cases[target]
            cost, limit = _limit(instance, opt.tree, target, case)
            if total > limit:
                raise AuditFailure("charge-limit", f"{case} target {target} carries {total} > {limit}")
            entries[str(target)] = LedgerEntry(
                case=case,
                total=RationalModel.of(total),
                cost=RationalModel.of(cost),
                ratio=RationalModel.of(total / cost if cost else Fraction(0)),
                limit=RationalModel.of(limit),
            )

        non_tree = instance.total_cost(final.edges - opt.tree.edges)
        accounted = (
            instance.total_cost(sigma_audit.members)
            + instance.total_cost(e_star.drops)
            + ledger.total
        )
        if accounted != non_tree:
            raise AuditFailure("conservation", f"charged {accounted}, non-T* cost {non_tree}")
        bound = implied_bound()
        if ratio > bound:
            raise AuditFailure("implied-bound", f"ratio {ratio} exceeds {bound}")
    except AuditFailure:
        logger.exception("Audit failed for %s", name or "instance")
        raise

    return AuditReport(
        instance=name,
        seed=seed,
        n=instance.vertex_count,
        players=len(instance.players),
        terminals=len(instance.terminals),
        opt_cost=RationalModel.of(opt.tree.total_cost / result.scale),
        final_cost=RationalModel.of(final.cost / result.scale),
        pos_ratio=RationalModel.of(ratio),
        moves=trace.moves,
        critical_moves=trace.critical_moves,
        e_sigma=list(sigma_audit.members),
        sigma_charges=[
            SigmaCharge(edge=e, target=t, ratio=RationalModel.of(sigma_audit.ratios[e]))
            for e, t in sorted(sigma_audit.charges.items())
        ],
        drops=[DropCharge(edge=e, target=t, rule=rule) for e, (t, rule) in sorted(e_star.drops.items())],
        e_star=list(e_star.edges),
        inflation={e: RationalModel.of(c) for e, c in sorted(e_star.inflation.items())},
        overlap_verdicts=verdicts,
        charge_ledger=entries,
        conservation=True,
        case_two_constant=RationalModel.of(case_two_constant()),
        implied_bound=RationalModel.of(bound),
        bound_respected=True,
        annotations=list(trace.annotations),
        audit_pass=True,
    )


__all__ = [
    "AuditReport",
    "EStar",
    "EquilibriumCatalog",
    "Ledger",
    "LedgerEntry",
    "OverlapVerdict",
    "RationalModel",
    "SigmaAudit",
    "audit_e_sigma",
    "audit_overlap",
    "audit_run",
    "build_e_star",
    "case_two_constant",
    "charge_to_neighborhood",
    "enumerate_nash",
    "implied_bound",
    "pos_ratio",
]
