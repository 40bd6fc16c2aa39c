"""Euclidean graphs over node locations.

Dependency graphs (k-NNG, disc), network graphs (complete, Gabriel, disc),
the Euclidean minimum spanning tree and nu-power shortest paths.

Edge arrays are ``(m, 2)`` int arrays with ``i < j`` in each row, rows in
lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import Delaunay, QhullError, cKDTree

# relative slack when testing whether an edge lies on a shortest path
_TIGHT_RTOL = 1e-12


class DuplicatePointsError(ValueError):
    """Two nodes share a location; jitter or dedupe before building graphs."""


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = np.column_stack([pts, np.zeros_like(pts)])
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    return pts


def _check_distinct(pts: np.ndarray) -> None:
    if len(np.unique(pts, axis=0)) != len(pts):
        raise DuplicatePointsError("duplicate node locations")


def edge_lengths(points, edges) -> np.ndarray:
    pts = _as_points(points)
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    d = pts[edges[:, 0]] - pts[edges[:, 1]]
    return np.hypot(d[:, 0], d[:, 1])


def power_weight(points, edges, nu: float) -> float:
    """Sum of ``|e| ** nu`` over a (multi)set of edges, multiplicity counted."""
    if nu < 0:
        raise ValueError("path-loss exponent must be non-negative")
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if len(edges) == 0:
        return 0.0
    return float(np.sum(edge_lengths(points, edges) ** nu))


def _canonical(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        return np.empty((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    base = int(e.max()) + 1 if len(e) else 1
    keys = np.unique(e[:, 0] * base + e[:, 1])
    return np.column_stack([keys // base, keys % base])


def _all_pairs(n: int) -> np.ndarray:
    i, j = np.triu_indices(n, k=1)
    return np.column_stack([i, j]).astype(np.int64)


@dataclass(frozen=True)
class DependencyGraph:
    n: int
    edges: np.ndarray = field(repr=False)
    kind: str = "empty"
    param: float = 0.0

    @classmethod
    def empty(cls, n: int) -> DependencyGraph:
        return cls(n, np.empty((0, 2), dtype=np.int64), "empty", 0.0)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edges.tolist():
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def edge_set(self) -> set[tuple[int, int]]:
        return {tuple(e) for e in self.edges.tolist()}


def build_knng(points, k: int) -> DependencyGraph:
    """Undirected k-nearest-neighbor graph.

    ``(i, j)`` is an edge when j is among the k nearest neighbors of i or
    vice versa.  Distance ties go to the lower vertex index.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise ValueError("k-NNG needs at least 2 points")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    _check_distinct(pts)
    tree = cKDTree(pts)
    kk = min(n, k + 2)
    while True:
        dist, idx = tree.query(pts, k=kk)
        # widen the query until no tie can straddle the k-th neighbor
        if kk >= n or not np.any(dist[:, kk - 1] <= dist[:, k]):
            break
        kk = min(n, 2 * kk)
    # exact distances, then order each row by (distance, index)
    d = pts[idx] - pts[:, None, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    dist[idx == np.arange(n)[:, None]] = -1.0
    order = np.lexsort((idx, dist), axis=1)
    nbrs = np.take_along_axis(idx, order, axis=1)[:, 1:k + 1]
    src = np.repeat(np.arange(n), k)
    edges = _canonical(np.column_stack([src, nbrs.ravel()]))
    return DependencyGraph(n, edges, "knng", float(k))


def build_disc(points, delta: float) -> DependencyGraph:
    """Disc graph: edge iff the pairwise distance is at most ``delta``."""
    if delta < 0:
        raise ValueError("disc radius must be non-negative")
    pts = _as_points(points)
    n = len(pts)
    if n < 2 or delta == 0:
        return DependencyGraph(n, np.empty((0, 2), dtype=np.int64), "disc", float(delta))
    pairs = cKDTree(pts).query_pairs(delta * (1 + 1e-9) + 1e-300, output_type="ndarray")
    pairs = _canonical(pairs)
    if len(pairs):
        pairs = pairs[edge_lengths(pts, pairs) <= delta]
    return DependencyGraph(n, pairs, "disc", float(delta))


def delaunay_edges(points) -> np.ndarray:
    """Delaunay edges, or all pairs when the triangulation is degenerate."""
    pts = _as_points(points)
    n = len(pts)
    if n < 4:
        return _all_pairs(n)
    try:
        tri = Delaunay(pts)
    except QhullError:
        return _all_pairs(n)
    if len(tri.coplanar):
        return _all_pairs(n)
    s = tri.simplices
    return _canonical(np.vstack([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]]))


@dataclass(frozen=True)
class SpanningTree:
    n: int
    edges: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    def total_power_weight(self, nu: float) -> float:
        return power_weight(self.points, self.edges, nu)

    def edge_set(self) -> set[tuple[int, int]]:
        return {tuple(e) for e in self.edges.tolist()}


def build_emst(points) -> SpanningTree:
    """Euclidean minimum spanning tree over the Delaunay candidate edges.

    Edges are totally ordered by ``(length, i, j)``, so the tree is unique
    and equal lengths resolve to the lexicographically smaller edge.
    Borůvka rounds: every component takes its cheapest outgoing edge.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise ValueError("EMST needs at least 2 points")
    _check_distinct(pts)
    cand = delaunay_edges(pts)
    order = np.lexsort((cand[:, 1], cand[:, 0], edge_lengths(pts, cand)))
    cand = cand[order]
    u, v = cand[:, 0], cand[:, 1]
    m = len(cand)
    rank = np.arange(m)
    chosen = np.zeros(m, dtype=bool)
    comp = np.arange(n)
    ncomp = n
    while ncomp > 1:
        live = comp[u] != comp[v]
        if not np.any(live):
            raise RuntimeError("candidate edge set does not span the points")
        best = np.full(n, m, dtype=np.int64)
        np.minimum.at(best, comp[u[live]], rank[live])
        np.minimum.at(best, comp[v[live]], rank[live])
        chosen[best[best < m]] = True
        graph = csr_matrix((np.ones(int(chosen.sum())), (u[chosen], v[chosen])), shape=(n, n))
        ncomp, comp = connected_components(graph, directed=False)
    return SpanningTree(n, _canonical(cand[chosen]), pts)


@dataclass(frozen=True)
class DirectedTree:
    root: int
    parent: np.ndarray = field(repr=False)

    def links(self) -> np.ndarray:
        """Directed ``(child, parent)`` pairs, ordered by child."""
        kids = np.flatnonzero(self.parent != np.arange(len(self.parent)))
        return np.column_stack([kids, self.parent[kids]])


def orient_to_root(tree: SpanningTree, root: int) -> DirectedTree:
    """Direct every tree edge toward ``root``."""
    n = tree.n
    if not 0 <= root < n:
        raise ValueError(f"root {root} out of range")
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in tree.edges.tolist():
        adj[i].append(j)
        adj[j].append(i)
    parent = np.full(n, -1, dtype=np.int64)
    parent[root] = root
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if parent[v] < 0:
                parent[v] = u
                stack.append(v)
    if np.any(parent < 0):
        raise ValueError("tree is disconnected")
    return DirectedTree(root, parent)


def _gabriel_edges(pts: np.ndarray) -> np.ndarray:
    cand = delaunay_edges(pts)
    if len(pts) < 3:
        return cand
    mid = 0.5 * (pts[cand[:, 0]] + pts[cand[:, 1]])
    radius = 0.5 * edge_lengths(pts, cand)
    tree = cKDTree(pts)
    keep = np.ones(len(cand), dtype=bool)
    # a blocking point, if any, is among the 3 nearest to the midpoint
    dist, idx = tree.query(mid, k=min(3, len(pts)))
    for c in range(idx.shape[1]):
        other = (idx[:, c] != cand[:, 0]) & (idx[:, c] != cand[:, 1])
        # recompute exactly to avoid kd-tree rounding on the boundary
        dd = pts[idx[:, c]] - mid
        exact = np.hypot(dd[:, 0], dd[:, 1])
        keep &= ~(other & (exact < radius))
    return cand[keep]


@dataclass(frozen=True)
class NetworkGraph:
    """Feasible communication links.

    ``kind`` is ``complete``, ``gabriel`` or ``disc``.  Shortest paths over a
    complete graph with ``nu >= 2`` run on its Gabriel subgraph, which holds
    every energy-optimal path at those exponents.
    """

    n: int
    edges: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    kind: str = "complete"
    radius: float = float("inf")
    connected: bool = True

    @property
    def lengths(self) -> np.ndarray:
        return edge_lengths(self.points, self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        if self.kind == "complete":
            return i != j
        if self.kind == "disc":
            return i != j and float(edge_lengths(self.points, [(i, j)])[0]) <= self.radius
        a, b = (i, j) if i < j else (j, i)
        pos = np.searchsorted(self.edges[:, 0], a, side="left")
        end = np.searchsorted(self.edges[:, 0], a, side="right")
        return bool(np.any(self.edges[pos:end, 1] == b))

    def routing_edges(self, nu: float) -> np.ndarray:
        if self.kind == "complete" and nu >= 2:
            return _gabriel_edges(self.points)
        return self.edges

    def edge_set(self) -> set[tuple[int, int]]:
        return {tuple(e) for e in self.edges.tolist()}


def _is_connected(n: int, edges: np.ndarray) -> bool:
    if n == 1:
        return True
    graph = csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(graph, directed=False)[0] == 1


def _finish_network(pts, edges, kind, radius=float("inf")) -> NetworkGraph:
    n = len(pts)
    connected = _is_connected(n, edges)
    if not connected:
        raise ValueError(f"{kind} network graph is disconnected")
    net = NetworkGraph(n, edges, pts, kind, radius, connected)
    if kind != "complete":
        mst = build_emst(pts)
        missing = mst.edge_set() - net.edge_set()
        if missing:
            raise ValueError(f"{kind} network graph misses EMST edges {sorted(missing)[:3]}")
    return net


def build_complete(points) -> NetworkGraph:
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("network needs at least 2 nodes")
    _check_distinct(pts)
    return _finish_network(pts, _all_pairs(len(pts)), "complete")


def build_gabriel(points) -> NetworkGraph:
    """Gabriel graph: (i, j) kept iff the open disc on diameter ij is empty."""
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("network needs at least 2 nodes")
    _check_distinct(pts)
    return _finish_network(pts, _canonical(_gabriel_edges(pts)), "gabriel")


def build_disc_network(points, radius: float) -> NetworkGraph:
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("network needs at least 2 nodes")
    _check_distinct(pts)
    edges = build_disc(pts, radius).edges
    return _finish_network(pts, edges, "disc", float(radius))


class Router:
    """Cached nu-power shortest paths over one network graph.

    Paths are the lexicographically smallest among all minimum-cost paths.
    """

    def __init__(self, net: NetworkGraph, nu: float):
        if nu < 0:
            raise ValueError("path-loss exponent must be non-negative")
        self.net = net
        self.nu = float(nu)
        e = net.routing_edges(nu)
        w = edge_lengths(net.points, e) ** nu
        n = net.n
        self._u = np.concatenate([e[:, 0], e[:, 1]])
        self._v = np.concatenate([e[:, 1], e[:, 0]])
        self._w = np.concatenate([w, w])
        # csgraph drops explicit zeros; weights are positive for distinct points
        self._graph = csr_matrix((self._w, (self._u, self._v)), shape=(n, n))
        self._dist: dict[int, np.ndarray] = {}
        self._next: dict[int, np.ndarray] = {}

    def prepare(self, sources) -> None:
        todo = sorted({int(s) for s in sources} - self._dist.keys())
        if todo:
            dist = dijkstra(self._graph, directed=False, indices=todo)
            for s, row in zip(todo, np.atleast_2d(dist)):
                self._dist[s] = row

    def costs_from(self, src: int) -> np.ndarray:
        self.prepare([src])
        return self._dist[src]

    def cost(self, src: int, dst: int) -> float:
        if src == dst:
            return 0.0
        if dst in self._dist:
            return float(self._dist[dst][src])
        return float(self.costs_from(src)[dst])

    def next_hops(self, dst: int) -> np.ndarray:
        """First hop of the lexicographically smallest shortest path to ``dst``.

        Entry ``dst`` maps to itself.
        """
        hops = self._next.get(dst)
        if hops is not None:
            return hops
        d = self.costs_from(dst)
        n = self.net.n
        gap = self._w + d[self._v] - d[self._u]
        tight = np.abs(gap) <= _TIGHT_RTOL * np.maximum(d[self._u], 1.0)
        hops = np.full(n, n, dtype=np.int64)
        np.minimum.at(hops, self._u[tight], self._v[tight])
        hops[dst] = dst
        if np.any(hops[np.isfinite(d)] >= n):
            raise RuntimeError("shortest-path tree is incomplete")
        self._next[dst] = hops
        return hops

    def path(self, src: int, dst: int) -> list[int]:
        if src == dst:
            return [src]
        if not np.isfinite(self.cost(src, dst)):
            raise ValueError(f"no path from {src} to {dst}")
        hops = self.next_hops(dst)
        out = [src]
        while out[-1] != dst:
            out.append(int(hops[out[-1]]))
        return out


def shortest_path(net: NetworkGraph, nu: float, src: int, dst: int) -> tuple[float, list[int]]:
    """Minimum ``sum |e|^nu`` path from ``src`` to ``dst`` and its cost."""
    if src == dst:
        return 0.0, [src]
    router = Router(net, nu)
    return router.cost(src, dst), router.path(src, dst)
