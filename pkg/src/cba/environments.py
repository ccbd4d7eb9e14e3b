"""Synthetic graph generators, dataset loading and the reward model.

Nodes carry a class label: 0 is the background class, 1..K are foreground
classes tied to actions.  Suggesting action ``a`` at a node is accepted
(reward +1) or rejected (reward -1) with a probability depending on
whether ``a`` matches the node's label; background nodes accept nothing
beyond the mismatch rate.  Abstaining always yields 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import Graph, connected_components
from .contextual import ComparatorPolicy
from .core import ABSTAIN
from .tree import BallOrder

_MAX_REGEN = 20


def _stitch_components(n, edges, rng):
    """Join every stray component to the largest one with a single
    rng-drawn unit edge.  Random sparse wirings leave isolated nodes with
    non-vanishing probability, so pure rejection sampling cannot reach
    connectivity at realistic sizes; a minimal deterministic stitch keeps
    node counts and the rest of the draw intact."""
    n_comp, comp = connected_components(n, [(u, v) for u, v, _ in edges])
    if n_comp == 1:
        return edges
    sizes = np.bincount(comp, minlength=n_comp)
    giant = int(np.argmax(sizes))
    giant_nodes = np.nonzero(comp == giant)[0]
    for c in range(n_comp):
        if c == giant:
            continue
        members = np.nonzero(comp == c)[0]
        u = int(members[rng.integers(members.size)])
        v = int(giant_nodes[rng.integers(giant_nodes.size)])
        edges.append((min(u, v), max(u, v), 1.0))
    return edges


@dataclass
class LabeledGraph:
    graph: Graph
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.graph.n_nodes,):
            raise ValueError("label array must have one entry per node")
        if np.any(self.labels < 0):
            raise ValueError("labels must be >= 0 (0 is background)")

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def n_classes(self) -> int:
        return int(self.labels.max(initial=0))


@dataclass(frozen=True)
class RewardModel:
    """Acceptance probabilities of suggestions and the reward values.

    A suggestion matching the node's foreground label is accepted with
    ``p_accept_match``; any other suggestion (including all suggestions at
    background nodes) with ``p_accept_mismatch``.
    """

    p_accept_match: float = 0.9
    p_accept_mismatch: float = 0.1
    reward_accept: float = 1.0
    reward_reject: float = -1.0

    def __post_init__(self):
        for p in (self.p_accept_match, self.p_accept_mismatch):
            if not 0.0 <= p <= 1.0:
                raise ValueError("acceptance probabilities must lie in [0, 1]")
        for r in (self.reward_accept, self.reward_reject):
            if not -1.0 <= r <= 1.0:
                raise ValueError("rewards must lie in [-1, 1]")

    def accept_prob(self, label: int, action: int) -> float:
        return self.p_accept_match if label == action else self.p_accept_mismatch

    def expected_reward(self, label: int, action: int) -> float:
        if action == ABSTAIN:
            return 0.0
        p = self.accept_prob(label, action)
        return p * self.reward_accept + (1.0 - p) * self.reward_reject


def draw_context(n_contexts: int, rng: np.random.Generator) -> int:
    """Uniformly random context id."""
    return int(rng.integers(n_contexts))


def draw_reward(model: RewardModel, label: int, action: int,
                rng: np.random.Generator) -> float:
    """Realized reward of suggesting ``action`` at a node with ``label``;
    abstention is always 0."""
    if action == ABSTAIN:
        return 0.0
    if rng.random() < model.accept_prob(label, action):
        return model.reward_accept
    return model.reward_reject


def draw_reward_vector(model: RewardModel, label: int, n_actions: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Realized rewards of all foreground actions on one trial (one draw
    per action, in action order)."""
    return np.array([draw_reward(model, label, a, rng)
                     for a in range(1, n_actions + 1)])


def gen_sbm(n_fg_classes: int, clique_size: int, n_background: int,
            rng: np.random.Generator, p_bg: float | None = None) -> LabeledGraph:
    """Disjoint clique per foreground class plus background nodes wired to
    every other node independently with probability ``p_bg`` (default
    ``1 / sqrt(clique_size * n_background)``).  Regenerates the random
    edges until the graph is connected, stitching stragglers after a
    bounded number of attempts."""
    if n_fg_classes < 1 or clique_size < 1 or n_background < 0:
        raise ValueError("bad block model parameters")
    if n_background == 0:
        if n_fg_classes > 1:
            raise ValueError("multiple cliques cannot connect without background")
        p_bg = 0.0
    elif p_bg is None:
        p_bg = 1.0 / np.sqrt(clique_size * n_background)
    n_fg = n_fg_classes * clique_size
    n = n_fg + n_background
    labels = np.zeros(n, dtype=np.int64)
    clique_edges = []
    for c in range(n_fg_classes):
        lo = c * clique_size
        labels[lo:lo + clique_size] = c + 1
        for i in range(lo, lo + clique_size):
            for j in range(i + 1, lo + clique_size):
                clique_edges.append((i, j, 1.0))
    for attempt in range(_MAX_REGEN):
        edges = list(clique_edges)
        for b in range(n_fg, n):
            hits = np.nonzero(rng.random(b) < p_bg)[0]
            edges.extend((int(u), b, 1.0) for u in hits)
        if connected_components(n, [(u, v) for u, v, _ in edges])[0] == 1:
            break
        if attempt == _MAX_REGEN - 1:
            edges = _stitch_components(n, edges, rng)
    return LabeledGraph(Graph(n, edges), labels)


_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def gen_gaussian_knn(n_fg_classes: int, fg_count: int, fg_sigma: float,
                     bg_count: int, bg_sigma: float, k: int,
                     rng: np.random.Generator) -> LabeledGraph:
    """Gaussian point clouds at the unit-square corners (foreground) and
    the center (background), joined into a symmetrized k-nearest-neighbor
    graph with unit weights.  Regenerates until connected."""
    if not 1 <= n_fg_classes <= 4:
        raise ValueError("foreground classes must number between 1 and 4")
    if k < 1 or fg_count < 1 or bg_count < 0:
        raise ValueError("bad point cloud parameters")
    n = n_fg_classes * fg_count + bg_count
    labels = np.zeros(n, dtype=np.int64)
    for c in range(n_fg_classes):
        labels[c * fg_count:(c + 1) * fg_count] = c + 1
    for attempt in range(_MAX_REGEN):
        pts = np.empty((n, 2))
        for c in range(n_fg_classes):
            pts[c * fg_count:(c + 1) * fg_count] = (
                _CORNERS[c] + fg_sigma * rng.standard_normal((fg_count, 2)))
        if bg_count:
            pts[n_fg_classes * fg_count:] = (
                0.5 + bg_sigma * rng.standard_normal((bg_count, 2)))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        kk = min(k, n - 1)
        pairs = set()
        for i in range(n):
            for j in np.argsort(dist[i], kind="stable")[:kk]:
                pairs.add((min(i, int(j)), max(i, int(j))))
        edges = [(u, v, 1.0) for u, v in sorted(pairs)]
        if connected_components(n, [(u, v) for u, v, _ in edges])[0] == 1:
            break
        if attempt == _MAX_REGEN - 1:
            edges = _stitch_components(n, edges, rng)
    return LabeledGraph(Graph(n, edges), labels)


class ParseError(ValueError):
    pass


def _parse_edges(path):
    edges = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) not in (2, 3):
                raise ParseError(f"{path}:{ln}: expected 'u v [weight]'")
            try:
                u, v = int(toks[0]), int(toks[1])
                w = float(toks[2]) if len(toks) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: {exc}") from exc
            edges.append((u, v, w))
    return edges


def _parse_labels(path):
    labels = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 2:
                raise ParseError(f"{path}:{ln}: expected 'node label'")
            try:
                node = int(toks[0])
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: {exc}") from exc
            labels[node] = toks[1]
    return labels


def load_edge_list(path_edges, path_labels, background_classes=(),
                   noise_fraction: float = 0.0,
                   rng: np.random.Generator | None = None) -> LabeledGraph:
    """Load a labeled graph from edge-list and label files.

    Restricts to the largest connected component, maps the labels listed
    in ``background_classes`` to the background class, and optionally
    flips ``noise_fraction`` of the foreground nodes (floor of the count)
    to uniformly random other foreground labels.
    """
    edges = _parse_edges(path_edges)
    raw_labels = _parse_labels(path_labels)
    if not edges:
        raise ParseError(f"{path_edges}: no edges")
    nodes = sorted(raw_labels)
    endpoints = {node for u, v, _ in edges for node in (u, v)}
    missing = endpoints - set(nodes)
    if missing:
        raise ParseError(f"{path_edges}: unlabeled nodes {sorted(missing)[:5]}")
    n_raw = max(nodes) + 1
    n_comp, comp = connected_components(n_raw, [(u, v) for u, v, _ in edges])
    sizes = np.bincount(comp, minlength=n_comp)
    # Nodes without edges form singleton components; pick the largest,
    # breaking ties by smallest member id.
    keep_label = min(range(n_comp),
                     key=lambda c: (-sizes[c], int(np.argmax(comp == c))))
    kept = [v for v in nodes if comp[v] == keep_label]
    if not kept:
        raise ParseError("largest component is empty")
    remap = {old: new for new, old in enumerate(kept)}
    new_edges = [(remap[u], remap[v], w) for u, v, w in edges
                 if u in remap and v in remap]
    background = {str(tok) for tok in background_classes}
    fg_tokens = sorted({raw_labels[v] for v in kept} - background)
    class_of = {tok: i + 1 for i, tok in enumerate(fg_tokens)}
    labels = np.array([0 if raw_labels[v] in background else class_of[raw_labels[v]]
                       for v in kept], dtype=np.int64)
    if noise_fraction > 0.0:
        if rng is None:
            raise ValueError("noise injection needs an rng")
        n_classes = len(fg_tokens)
        if n_classes < 2:
            raise ValueError("label noise needs at least two foreground classes")
        fg_idx = np.nonzero(labels > 0)[0]
        n_flip = int(np.floor(noise_fraction * fg_idx.size))
        flip = rng.choice(fg_idx, size=n_flip, replace=False)
        offsets = rng.integers(1, n_classes, size=n_flip)
        labels[flip] = (labels[flip] - 1 + offsets) % n_classes + 1
    return LabeledGraph(Graph(len(kept), new_edges), labels)


def save_graph_files(lg: LabeledGraph, path_edges, path_labels):
    """Write the edge-list and label files read back by ``load_edge_list``
    (labels are written as their integer class, background as 0)."""
    with open(path_edges, "w") as fh:
        fh.write("# u v weight\n")
        for u, v, w in lg.graph.edges():
            fh.write(f"{u} {v} {w:g}\n")
    with open(path_labels, "w") as fh:
        fh.write("# node label\n")
        for v, lab in enumerate(lg.labels.tolist()):
            fh.write(f"{v} {lab}\n")


def planted_ball_policy(lg: LabeledGraph, metric, model: RewardModel) -> ComparatorPolicy:
    """One metric ball per foreground class, greedily chosen to maximize
    the expected per-trial reward of playing that class inside the ball;
    balls of later classes are kept disjoint from earlier picks.

    On well-separated instances (block-model cliques) the picked balls are
    exactly the class sets, making this the natural comparator for regret
    measurements.
    """
    labels = lg.labels
    d = metric.d
    n = lg.n_nodes
    value = {}
    taken: set[int] = set()
    pieces = []
    for cls in range(1, lg.n_classes + 1):
        members = np.nonzero(labels == cls)[0]
        best = None  # (score, center, ball tuple)
        for x in members:
            order = BallOrder.from_distances(int(x), d[x]).order
            dists = d[x][order]
            running = 0.0
            for j, z in enumerate(order):
                z = int(z)
                if z in taken:
                    break  # larger balls would overlap an earlier pick
                key = (int(labels[z]), cls)
                if key not in value:
                    value[key] = model.expected_reward(labels[z], cls)
                running += value[key]
                boundary = j + 1 == n or dists[j + 1] > dists[j]
                if boundary and (best is None or running > best[0]):
                    best = (running, int(x), tuple(int(v) for v in order[:j + 1]))
        if best is not None and best[0] > 0.0:
            ball = frozenset(best[2])
            taken |= ball
            pieces.append((ball, cls, 1.0))
    return ComparatorPolicy(pieces)


def expected_policy_reward(policy: ComparatorPolicy, lg: LabeledGraph,
                           model: RewardModel) -> float:
    """Expected per-trial reward of a comparator policy under uniformly
    random contexts and the stochastic reward model."""
    total = 0.0
    for el, action, weight in policy.pieces:
        for z in el:
            total += weight * model.expected_reward(int(lg.labels[z]), action)
    return total / lg.n_nodes
