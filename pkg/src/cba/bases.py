"""Graph metrics and basis builders.

A basis is a collection of context subsets encoding inductive bias; paired
with actions its elements become specialist experts.  This module builds

* the three graph metrics d_1 (inverse min-cut), d_2 (square root of the
  effective resistance) and d_inf (weighted shortest path),
* per-center distance orders and the distinct metric balls they induce,
* the Louvain + greedy-peeling community basis, and
* the geodesic interval basis.

Edge weights are interpreted per metric: lengths for shortest paths,
conductances/capacities for resistance and cuts.  Parallel edges are
coalesced accordingly (min for lengths, sum otherwise).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.csgraph import floyd_warshall

from .tree import BallOrder


class GraphError(ValueError):
    pass


class Graph:
    """Undirected weighted graph on nodes 0..N-1.

    No self-loops; must be connected (required for the d_p metrics).
    Parallel edges are kept in the edge list and coalesced by the
    individual metric builders.
    """

    def __init__(self, n_nodes: int, edges):
        if n_nodes < 1:
            raise GraphError("graph needs at least one node")
        self.n_nodes = n_nodes
        u_list, v_list, w_list = [], [], []
        for edge in edges:
            if len(edge) == 2:
                u, v = edge
                w = 1.0
            else:
                u, v, w = edge
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range")
            if not (w > 0.0) or not np.isfinite(w):
                raise GraphError(f"edge ({u}, {v}) has non-positive weight")
            u_list.append(u)
            v_list.append(v)
            w_list.append(w)
        self.edge_u = np.asarray(u_list, dtype=np.int64)
        self.edge_v = np.asarray(v_list, dtype=np.int64)
        self.edge_w = np.asarray(w_list, dtype=float)
        if n_nodes > 1 and not self._connected():
            raise GraphError("graph is not connected")

    @property
    def n_edges(self) -> int:
        return self.edge_u.size

    def edges(self):
        return list(zip(self.edge_u.tolist(), self.edge_v.tolist(),
                        self.edge_w.tolist()))

    def _connected(self) -> bool:
        return connected_components(self.n_nodes,
                                    zip(self.edge_u, self.edge_v))[0] == 1

    def weight_matrix(self, combine: str = "sum") -> np.ndarray:
        """Dense symmetric weight matrix; parallel edges combined by
        ``sum`` (conductance/capacity view) or ``min`` (length view)."""
        n = self.n_nodes
        mat = np.zeros((n, n))
        if combine == "sum":
            np.add.at(mat, (self.edge_u, self.edge_v), self.edge_w)
            np.add.at(mat, (self.edge_v, self.edge_u), self.edge_w)
        elif combine == "min":
            for u, v, w in zip(self.edge_u, self.edge_v, self.edge_w):
                if mat[u, v] == 0.0 or w < mat[u, v]:
                    mat[u, v] = mat[v, u] = w
        else:
            raise ValueError(f"unknown combine mode {combine!r}")
        return mat

    def degrees(self) -> np.ndarray:
        """Weighted degrees (parallel edges summed)."""
        deg = np.zeros(self.n_nodes)
        np.add.at(deg, self.edge_u, self.edge_w)
        np.add.at(deg, self.edge_v, self.edge_w)
        return deg

    def to_networkx(self, combine: str = "sum") -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        mat = self.weight_matrix(combine=combine)
        iu, iv = np.nonzero(np.triu(mat))
        for u, v in zip(iu.tolist(), iv.tolist()):
            g.add_edge(u, v, weight=float(mat[u, v]))
        return g


def connected_components(n_nodes: int, edges):
    """(count, label array) of connected components via union-find."""
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(int(u)), find(int(v))
        if ru != rv:
            parent[ru] = rv
    labels = np.asarray([find(i) for i in range(n_nodes)])
    roots, labels = np.unique(labels, return_inverse=True)
    return roots.size, labels


class MetricMatrix:
    """Symmetric non-negative distance matrix with zero diagonal."""

    __slots__ = ("d",)

    def __init__(self, d: np.ndarray):
        d = np.asarray(d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("metric must be a square matrix")
        if not np.allclose(d, d.T, rtol=0.0, atol=1e-12):
            raise ValueError("metric must be symmetric")
        if np.any(np.abs(np.diag(d)) > 0.0):
            raise ValueError("metric diagonal must be zero")
        if np.any(d < 0.0) or not np.all(np.isfinite(d)):
            raise ValueError("metric entries must be finite and >= 0")
        d = 0.5 * (d + d.T)
        d.setflags(write=False)
        self.d = d

    @property
    def n_contexts(self) -> int:
        return self.d.shape[0]


def shortest_path_metric(g: Graph) -> MetricMatrix:
    """All-pairs weighted shortest paths (weights as lengths)."""
    mat = g.weight_matrix(combine="min")
    dist = floyd_warshall(mat, directed=False, unweighted=False)
    if np.any(np.isinf(dist)):
        raise GraphError("graph is not connected")
    np.fill_diagonal(dist, 0.0)
    return MetricMatrix(dist)


def effective_resistance_metric(g: Graph) -> MetricMatrix:
    """d(i, j) = sqrt(L+_ii + L+_jj - 2 L+_ij) with L+ the pseudoinverse of
    the weighted graph Laplacian (weights as conductances).

    One symmetric factorization of L + J/N is reused for all pairs; for a
    connected graph (L + J/N)^{-1} - J/N equals the pseudoinverse.
    """
    n = g.n_nodes
    w = g.weight_matrix(combine="sum")
    lap = np.diag(w.sum(axis=1)) - w
    shifted = lap + np.full((n, n), 1.0 / n)
    try:
        factor = cho_factor(shifted)
        pinv = cho_solve(factor, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise GraphError(f"Laplacian solve failed: {exc}") from exc
    pinv -= 1.0 / n
    diag = np.diag(pinv)
    res = diag[:, None] + diag[None, :] - 2.0 * pinv
    res = np.maximum(res, 0.0)
    np.fill_diagonal(res, 0.0)
    d = np.sqrt(res)
    return MetricMatrix(0.5 * (d + d.T))


def mincut_metric(g: Graph) -> MetricMatrix:
    """d(i, j) = 1 / (minimum cut separating i from j), computed from a
    Gomory-Hu tree (N-1 max-flow calls; weights as capacities)."""
    n = g.n_nodes
    if n == 1:
        return MetricMatrix(np.zeros((1, 1)))
    gh = nx.gomory_hu_tree(g.to_networkx(combine="sum"), capacity="weight")
    adj = [[] for _ in range(n)]
    for u, v, w in gh.edges(data="weight"):
        adj[u].append((v, w))
        adj[v].append((u, w))
    # min cut between i and j = minimum edge weight on the tree path
    cuts = np.zeros((n, n))
    for src in range(n):
        best = np.full(n, np.inf)
        best[src] = np.inf
        stack = [src]
        seen = np.zeros(n, dtype=bool)
        seen[src] = True
        while stack:
            node = stack.pop()
            for nb, w in adj[node]:
                if not seen[nb]:
                    seen[nb] = True
                    best[nb] = min(best[node], w)
                    stack.append(nb)
        cuts[src] = best
    d = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    d[off] = 1.0 / cuts[off]
    return MetricMatrix(np.minimum(d, d.T))


@dataclass
class Basis:
    """Collection of non-empty, pairwise distinct context sets, each with a
    provenance tag (ball center/radius, peeling chain index, interval
    endpoints, ...)."""

    elements: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for el in self.elements:
            fs = frozenset(el)
            if not fs:
                raise ValueError("basis elements must be non-empty")
            if fs in seen:
                raise ValueError("duplicate basis element")
            seen.add(fs)
        self.elements = [frozenset(el) for el in self.elements]
        if not self.provenance:
            self.provenance = [None] * len(self.elements)
        if len(self.provenance) != len(self.elements):
            raise ValueError("provenance length mismatch")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @classmethod
    def from_sets(cls, sets, provenance=None) -> "Basis":
        """Build with deduplication, keeping first-seen provenance."""
        sets = list(sets)
        if provenance is None:
            provenance = [None] * len(sets)
        if len(provenance) != len(sets):
            raise ValueError("provenance length mismatch")
        elements, tags, seen = [], [], set()
        for el, tag in zip(sets, provenance):
            fs = frozenset(el)
            if fs and fs not in seen:
                seen.add(fs)
                elements.append(fs)
                tags.append(tag)
        return cls(elements=elements, provenance=tags)


def ball_orders(metric: MetricMatrix) -> list[BallOrder]:
    """Per-center distance orders (ties broken by context id).  The nested
    prefixes of each order, cut at strict distance increases, are exactly
    the distinct balls centered there."""
    return [BallOrder.from_distances(x, metric.d[x])
            for x in range(metric.n_contexts)]


def metric_ball_basis(metric: MetricMatrix) -> Basis:
    """All distinct metric balls, deduplicated across centers."""
    n = metric.n_contexts
    sets, tags, seen = [], [], set()
    for order in ball_orders(metric):
        x = order.center
        dists = metric.d[x][order.order]
        for j in range(n):
            if j + 1 < n and dists[j + 1] == dists[j]:
                continue  # not a ball boundary: same radius continues
            ball = frozenset(order.order[:j + 1].tolist())
            if ball not in seen:
                seen.add(ball)
                sets.append(ball)
                tags.append(("ball", x, float(dists[j])))
    return Basis(elements=sets, provenance=tags)


def louvain_communities(g: Graph, rng: np.random.Generator) -> list[set]:
    """Louvain modularity communities (resolution 1.0); the node visitation
    order is randomized from ``rng`` so runs are reproducible by seed."""
    seed = int(rng.integers(0, 2**31 - 1))
    comms = nx.community.louvain_communities(
        g.to_networkx(combine="sum"), weight="weight", resolution=1.0,
        seed=seed)
    return [set(c) for c in sorted(comms, key=min)]


def greedy_peeling_chain(g: Graph, cluster) -> list[frozenset]:
    """Nested chain from a cluster down to a singleton by repeatedly
    deleting a minimum-degree node of the induced subgraph.

    Degree ties are broken toward the largest node id, so low-id hubs
    survive the longest.  Returns the chain largest-first."""
    cluster = sorted(int(v) for v in cluster)
    if not cluster:
        raise ValueError("empty cluster")
    members = set(cluster)
    w = g.weight_matrix(combine="sum")
    deg = {v: float(sum(w[v, u] for u in members if u != v)) for v in members}
    chain = [frozenset(members)]
    while len(members) > 1:
        victim = min(members, key=lambda v: (deg[v], -v))
        members.remove(victim)
        for u in members:
            deg[u] -= w[u, victim]
        chain.append(frozenset(members))
    return chain


def community_basis(g: Graph, rng: np.random.Generator) -> Basis:
    """Greedy-peeling chains of every Louvain community, plus all
    singletons, deduplicated."""
    sets, tags = [], []
    for i, comm in enumerate(louvain_communities(g, rng)):
        for j, sub in enumerate(greedy_peeling_chain(g, comm)):
            sets.append(sub)
            tags.append(("chain", i, len(comm) - j))
    for v in range(g.n_nodes):
        sets.append(frozenset([v]))
        tags.append(("singleton", v))
    return Basis.from_sets(sets, tags)


def interval_basis(g: Graph, tol: float = 1e-9) -> Basis:
    """All distinct geodesic intervals I(x, y) = nodes on some shortest
    x-y path, over unordered pairs (including I(x, x) = {x})."""
    d = shortest_path_metric(g).d
    n = g.n_nodes
    sets, tags, seen = [], [], set()
    for x in range(n):
        for y in range(x, n):
            on_path = d[x] + d[y] <= d[x, y] + tol
            interval = frozenset(np.nonzero(on_path)[0].tolist())
            if interval not in seen:
                seen.add(interval)
                sets.append(interval)
                tags.append(("interval", x, y))
    return Basis(elements=sets, provenance=tags)


def write_basis_file(path, basis: Basis):
    """One element per line as space-separated node ids."""
    with open(path, "w") as fh:
        for el in basis.elements:
            fh.write(" ".join(str(v) for v in sorted(el)) + "\n")


def read_basis_file(path) -> Basis:
    sets = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                sets.append(frozenset(int(tok) for tok in line.split()))
    return Basis.from_sets(sets)
