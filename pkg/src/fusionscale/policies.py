"""Fusion policies (DT, SP, MST aggregation, DFMRF) and their energy.

A plan is an unordered multiset of directed transmissions.  Each row is one
packet: ``src -> dst`` in a phase, carrying either the raw reading of
``origin`` on its way to the processor of clique ``clique`` (forwarding), or
an aggregated partial sum (aggregation, ``origin == clique == -1``).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .cliques import CliqueSet, choose_processor, maximal_cliques
from .geograph import (
    DependencyGraph,
    NetworkGraph,
    Router,
    SpanningTree,
    build_complete,
    build_emst,
    edge_lengths,
    orient_to_root,
)
from .placement import Deployment

FORWARDING = 0
AGGREGATION = 1
PHASES = {FORWARDING: "forwarding", AGGREGATION: "aggregation"}

POLICY_KINDS = ("DT", "SP", "MST_AGG", "DFMRF")


@dataclass(frozen=True)
class FusionPlan:
    policy_kind: str
    deployment: Deployment = field(repr=False)
    src: np.ndarray = field(repr=False)
    dst: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)
    origin: np.ndarray = field(repr=False)
    clique: np.ndarray = field(repr=False)
    cliques: list[tuple[int, ...]] = field(default_factory=list, repr=False)
    processors: list[int] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.deployment.n

    @property
    def fusion_center(self) -> int:
        return self.deployment.fusion_center

    @property
    def deployment_ref(self) -> str:
        return self.deployment.digest

    def __len__(self) -> int:
        return len(self.src)

    def links(self, phase: int | None = None) -> list[tuple[int, int]]:
        """Directed links as a sorted list, multiplicity preserved."""
        mask = slice(None) if phase is None else self.phase == phase
        return sorted(zip(self.src[mask].tolist(), self.dst[mask].tolist()))

    def link_counts(self, phase: int | None = None) -> Counter:
        return Counter(self.links(phase))


class _PlanBuilder:
    def __init__(self):
        self.rows: list[tuple[int, int, int, int, int]] = []

    def path(self, nodes: list[int], origin: int, clique: int, phase: int = FORWARDING):
        for a, b in zip(nodes[:-1], nodes[1:]):
            self.rows.append((a, b, phase, origin, clique))

    def tree(self, links: np.ndarray):
        for a, b in links.tolist():
            self.rows.append((a, b, AGGREGATION, -1, -1))

    def build(self, kind, dep, cliques=(), processors=()) -> FusionPlan:
        arr = np.array(self.rows, dtype=np.int64).reshape(-1, 5)
        return FusionPlan(kind, dep, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
                          list(cliques), list(processors))


def plan_dt(dep: Deployment) -> FusionPlan:
    """Every node sends its reading straight to the fusion center."""
    fc = dep.fusion_center
    b = _PlanBuilder()
    for i in range(dep.n):
        if i != fc:
            b.path([i, fc], origin=i, clique=-1)
    return b.build("DT", dep)


def _router(dep, net, nu, router):
    if router is not None:
        return router
    return Router(net if net is not None else build_complete(dep.points), nu)


def plan_sp(dep: Deployment, net: NetworkGraph | None = None, nu: float = 2.0,
            router: Router | None = None) -> FusionPlan:
    """Raw readings routed to the fusion center along shortest paths, no combining."""
    router = _router(dep, net, nu, router)
    fc = dep.fusion_center
    hops = router.next_hops(fc)
    b = _PlanBuilder()
    for i in range(dep.n):
        v = i
        while v != fc:
            w = int(hops[v])
            b.rows.append((v, w, FORWARDING, i, -1))
            v = w
    return b.build("SP", dep)


def _dmst_links(dep: Deployment, tree: SpanningTree | None) -> np.ndarray:
    tree = build_emst(dep.points) if tree is None else tree
    return orient_to_root(tree, dep.fusion_center).links()


def plan_mst_agg(dep: Deployment, tree: SpanningTree | None = None) -> FusionPlan:
    """Aggregation of per-node log-likelihood ratios along the DMST."""
    b = _PlanBuilder()
    b.tree(_dmst_links(dep, tree))
    return b.build("MST_AGG", dep)


def plan_dfmrf(dep: Deployment, dg: DependencyGraph, net: NetworkGraph | None = None,
               nu: float = 2.0, proc_mode: str = "min_cost",
               tree: SpanningTree | None = None, router: Router | None = None,
               cliques: CliqueSet | None = None) -> FusionPlan:
    """Two-phase DFMRF plan.

    Forwarding: each member of each maximal clique sends its raw reading to
    the clique's processor over a shortest path, once per clique.
    Aggregation: clique potentials are summed along the DMST to the fusion
    center.
    """
    if dg.n != dep.n:
        raise ValueError("dependency graph and deployment sizes differ")
    cliques = maximal_cliques(dg) if cliques is None else cliques
    b = _PlanBuilder()
    procs = []
    big = [c for c in cliques if len(c) > 1]
    if big:
        router = _router(dep, net, nu, router)
        if proc_mode == "min_cost":
            router.prepare({v for c in big for v in c})
    for ci, c in enumerate(cliques):
        if len(c) == 1:
            procs.append(c[0])
            continue
        p = choose_processor(c, nu=nu, mode=proc_mode, router=router)
        procs.append(p)
        for i in c:
            if i != p:
                b.path(router.path(i, p), origin=i, clique=ci)
    b.tree(_dmst_links(dep, tree))
    return b.build("DFMRF", dep, cliques.cliques, procs)


@dataclass(frozen=True)
class EnergyReport:
    total: float
    per_phase: dict[str, float]
    average: float
    policy_kind: str
    n: int
    nu: float


def energy(plan: FusionPlan, nu: float) -> EnergyReport:
    """Total and per-phase ``sum |i,j|^nu`` over the plan's links."""
    if nu < 0:
        raise ValueError("path-loss exponent must be non-negative")
    per_phase = {}
    for ph, name in PHASES.items():
        mask = plan.phase == ph
        if np.any(mask):
            pairs = np.column_stack([plan.src[mask], plan.dst[mask]])
            per_phase[name] = float(np.sum(edge_lengths(plan.deployment.points, pairs) ** nu))
        else:
            per_phase[name] = 0.0
    total = per_phase["forwarding"] + per_phase["aggregation"]
    return EnergyReport(total, per_phase, total / plan.n, plan.policy_kind, plan.n, float(nu))


@dataclass(frozen=True)
class TokenTrace:
    delivered: Counter
    expected: list[tuple[int, ...]]
    missing: list[tuple[int, ...]] = field(default_factory=list)
    duplicated: list[tuple[int, ...]] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.missing and not self.duplicated and not self.problems


def verify_coverage(plan: FusionPlan, dg: DependencyGraph) -> TokenTrace:
    """Replay the plan symbolically and list the clique tokens reaching the fusion center.

    A clique token appears at its processor only if every member's raw
    reading got there in the forwarding phase.  Aggregation links then carry
    the union of the tokens held by the sender and everything it received.
    """
    n = plan.n
    expected = maximal_cliques(dg).cliques
    problems: list[str] = []
    proc_of = dict(zip(plan.cliques, plan.processors))

    fwd = plan.phase == FORWARDING
    raw_at: list[set[int]] = [{v} for v in range(n)]
    # forward each origin's packets from the origin outward until nothing changes
    by_origin: dict[int, list[tuple[int, int]]] = {}
    for s, d, o in zip(plan.src[fwd].tolist(), plan.dst[fwd].tolist(), plan.origin[fwd].tolist()):
        by_origin.setdefault(o, []).append((s, d))
    for o, hops in by_origin.items():
        holders = {o}
        pending = list(hops)
        progress = True
        while pending and progress:
            progress = False
            rest = []
            for s, d in pending:
                if s in holders:
                    holders.add(d)
                    progress = True
                else:
                    rest.append((s, d))
            pending = rest
        if pending:
            problems.append(f"raw data of node {o} sent from nodes that never held it")
        for h in holders:
            raw_at[h].add(o)

    # raw-forwarding policies compute every potential at the fusion center
    raw_to_fc = plan.policy_kind in ("DT", "SP")
    tokens: list[Counter] = [Counter() for _ in range(n)]
    missing: list[tuple[int, ...]] = []
    for c in expected:
        if raw_to_fc:
            p = plan.fusion_center
        else:
            p = proc_of.get(c, c[0] if len(c) == 1 else None)
        if p is None:
            problems.append(f"clique {c} has no processor")
            missing.append(c)
            continue
        if not set(c) <= raw_at[p]:
            problems.append(f"processor {p} lacks member data for clique {c}")
            missing.append(c)
            continue
        tokens[p][c] += 1

    agg = plan.phase == AGGREGATION
    out_links: list[list[int]] = [[] for _ in range(n)]
    indeg = np.zeros(n, dtype=np.int64)
    for s, d in zip(plan.src[agg].tolist(), plan.dst[agg].tolist()):
        out_links[s].append(d)
        indeg[d] += 1
    # Kahn order: a node transmits once everything addressed to it has arrived
    ready = [v for v in range(n) if indeg[v] == 0]
    sent = 0
    while ready:
        v = ready.pop()
        for d in out_links[v]:
            tokens[d].update(tokens[v])
            sent += 1
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
    if sent != int(agg.sum()):
        problems.append("aggregation links contain a cycle")

    fc = plan.fusion_center
    delivered = tokens[fc]
    for c in expected:
        if c not in delivered and c not in missing:
            missing.append(c)
    duplicated = [c for c, k in delivered.items() if k > 1]
    extra = [c for c in delivered if c not in set(expected)]
    if extra:
        problems.append(f"unexpected tokens delivered: {extra[:3]}")
    return TokenTrace(delivered, expected, missing, duplicated, problems)
