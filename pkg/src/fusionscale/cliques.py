"""Maximal cliques of dependency graphs and per-clique processor choice."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .geograph import DependencyGraph, NetworkGraph, Router

MAX_CLIQUES = 10**6
_TIE_RTOL = 1e-12


class NonScalableRegimeError(RuntimeError):
    """Clique enumeration exceeded the cap; the dependency graph is too dense."""


@dataclass(frozen=True)
class CliqueSet:
    cliques: list[tuple[int, ...]]
    source_graph_hash: str = field(default="")

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)


def graph_hash(g: DependencyGraph) -> str:
    h = hashlib.sha256(np.int64(g.n).tobytes())
    h.update(np.ascontiguousarray(g.edges, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def maximal_cliques(g: DependencyGraph, cap: int = MAX_CLIQUES) -> CliqueSet:
    """All maximal cliques, Bron-Kerbosch with Tomita pivoting.

    Isolated vertices come out as singletons.  Output is sorted by the
    sorted member lists.
    """
    adj = g.adjacency()
    found: list[tuple[int, ...]] = []

    # iterative to stay clear of the recursion limit on dense inputs
    stack = [((), set(range(g.n)), set())]
    while stack:
        r, p, x = stack.pop()
        if not p:
            if not x:
                found.append(tuple(sorted(r)))
                if len(found) > cap:
                    raise NonScalableRegimeError(
                        f"more than {cap} maximal cliques; dependency graph too dense")
            continue
        pivot = max(p | x, key=lambda u: (len(adj[u] & p), -u))
        for v in sorted(p - adj[pivot]):
            nv = adj[v]
            stack.append((r + (v,), p & nv, x & nv))
            p = p - {v}
            x = x | {v}
    found.sort()
    return CliqueSet(found, graph_hash(g))


def choose_processor(clique, net: NetworkGraph | None = None, nu: float = 2.0,
                     mode: str = "min_cost", router: Router | None = None) -> int:
    """Pick the member that computes the clique potential.

    ``min_cost`` minimizes the total shortest-path cost of the other members
    forwarding to it; ``min_index`` takes the smallest member.  Ties go to
    the lower index.
    """
    members = sorted(int(v) for v in clique)
    if not members:
        raise ValueError("empty clique")
    if mode == "min_index" or len(members) == 1:
        return members[0]
    if mode != "min_cost":
        raise ValueError(f"unknown processor mode {mode!r}")
    if router is None:
        if net is None:
            raise ValueError("min_cost mode needs a network graph")
        router = Router(net, nu)
    router.prepare(members)
    idx = np.asarray(members)
    costs = np.array([router.costs_from(m)[idx].sum() for m in members])
    # equal sums can differ in the last bits depending on summation order
    tied = np.flatnonzero(costs <= costs.min() * (1 + _TIE_RTOL))
    return members[int(tied[0])]
