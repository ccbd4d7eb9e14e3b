"""Balanced binary tree supporting suffix-sum queries and multiplicative
suffix updates in O(log N).

Leaves hold a non-negative function over contexts, laid out in a fixed
order (for metric-ball learners: increasing distance from a center).  Each
node ``v`` carries a lazy multiplier ``phi(v)`` and a partial sum
``psi(v)`` so that

    psi(v) * prod(phi(v') for v' in ancestors-of-v-including-v)
        == sum of leaf values below v

holds at all times.  A query at position ``q`` returns the sum of leaf
values at positions >= q with one root-to-leaf pass; an update multiplies
every leaf value at positions >= q by a factor, again in one pass.

``SuffixProductTree`` is the single-tree reference implementation;
``SuffixProductForest`` runs the same two algorithms batched over a whole
(center, action) family of trees via numba kernels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# Rebuild threshold: once any lazy multiplier leaves this range the owning
# structure recomputes explicit leaf values and resets all multipliers.
PHI_MIN = 1e-300
PHI_MAX = 1e300


@dataclass(frozen=True)
class BallOrder:
    """Contexts sorted by increasing distance from a center.

    Ties are broken by ascending context id, so the order is a
    deterministic permutation of all contexts with the center first.
    """

    center: int
    order: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        object.__setattr__(self, "order", order)
        n = order.size
        if n == 0:
            raise ValueError("empty ball order")
        if not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("order must be a permutation of 0..N-1")
        if order[0] != self.center:
            raise ValueError("center must be the first element of its order")

    @classmethod
    def from_distances(cls, center: int, distances) -> "BallOrder":
        d = np.asarray(distances, dtype=float)
        idx = np.lexsort((np.arange(d.size), d))
        return cls(center=center, order=idx)

    @property
    def n_contexts(self) -> int:
        return self.order.size

    def positions(self) -> np.ndarray:
        """Inverse permutation: context id -> leaf position."""
        pos = np.empty(self.order.size, dtype=np.int64)
        pos[self.order] = np.arange(self.order.size)
        return pos


def _padded_size(n: int) -> int:
    p = 2
    while p < n:
        p *= 2
    return p


class SuffixProductTree:
    """Single suffix tree over N contexts (padded to a power of two with
    zero-valued leaves, which are invisible to sums and multiplications).

    With ``debug=True`` the node identity is re-verified by full traversal
    after every update."""

    def __init__(self, initial, order: BallOrder | None = None,
                 debug: bool = False):
        values = np.asarray(initial, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("initial values must be a non-empty vector")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("initial leaf values must be finite and >= 0")
        n = values.size
        if order is not None and order.n_contexts != n:
            raise ValueError("order size does not match initial values")
        self.n_contexts = n
        self.n_leaves = _padded_size(n)
        self._pos = order.positions() if order is not None else np.arange(n)
        self.debug = debug
        # initial values are given in leaf-position order
        self._build(values)
        if self.debug:
            self.check_invariant()

    def _build(self, values: np.ndarray):
        p = self.n_leaves
        self.phi = [1.0] * (2 * p)
        self.psi = [0.0] * (2 * p)
        for j, val in enumerate(values):
            self.psi[p + j] = float(val)
        for v in range(p - 1, 0, -1):
            self.psi[v] = self.psi[2 * v] + self.psi[2 * v + 1]

    def _leaf_index(self, ctx: int) -> int:
        if not 0 <= ctx < self.n_contexts:
            raise KeyError(f"unknown context id {ctx}")
        return self.n_leaves + int(self._pos[ctx])

    def query(self, ctx: int) -> float:
        """Sum of leaf values at positions >= position(ctx)."""
        v = self._leaf_index(ctx)
        phi, psi = self.phi, self.psi
        sigma = psi[v] * phi[v]
        while v > 1:
            parent = v >> 1
            if v & 1 == 0:
                sib = v + 1
                sigma = phi[parent] * (sigma + psi[sib] * phi[sib])
            else:
                sigma = phi[parent] * sigma
            v = parent
        return sigma

    def update(self, ctx: int, u: float):
        """Multiply every leaf value at positions >= position(ctx) by ``u``."""
        if not (u > 0.0) or not np.isfinite(u):
            raise ValueError("update factor must be positive and finite")
        leaf = self._leaf_index(ctx)
        phi, psi = self.phi, self.psi
        depth = leaf.bit_length() - 1
        # push lazy multipliers down the root path
        for shift in range(depth, 0, -1):
            g = leaf >> shift
            pg = phi[g]
            if pg != 1.0:
                phi[2 * g] *= pg
                phi[2 * g + 1] *= pg
                phi[g] = 1.0
        # multiply the right-hand subtrees hanging off the path, then the leaf
        for shift in range(depth, 0, -1):
            g = leaf >> shift
            if leaf >> (shift - 1) == 2 * g:
                phi[2 * g + 1] *= u
        phi[leaf] *= u
        # recompute partial sums up the path
        g = leaf >> 1
        while g >= 1:
            psi[g] = psi[2 * g] * phi[2 * g] + psi[2 * g + 1] * phi[2 * g + 1]
            g >>= 1
        if self.debug:
            self.check_invariant()

    def leaf_value(self, ctx: int) -> float:
        """Current value at a single leaf (test/debug accessor)."""
        v = self._leaf_index(ctx)
        val = self.psi[v]
        while v >= 1:
            val *= self.phi[v]
            v >>= 1
        return val

    def _leaf_value_at(self, pos: int) -> float:
        v = self.n_leaves + pos
        val = self.psi[v]
        while v >= 1:
            val *= self.phi[v]
            v >>= 1
        return val

    def check_invariant(self, tol: float = 1e-9):
        """Assert the node identity against explicit leaf sums (full
        traversal; meant for tests and debugging)."""
        p = self.n_leaves
        leaf_vals = [self._leaf_value_at(j) for j in range(p)]
        subtree = [0.0] * (2 * p)
        for j in range(p):
            subtree[p + j] = leaf_vals[j]
        for v in range(p - 1, 0, -1):
            subtree[v] = subtree[2 * v] + subtree[2 * v + 1]
        # product of phi over ancestors of v including v itself
        anc = [1.0] * (2 * p)
        anc[1] = self.phi[1]
        for v in range(2, 2 * p):
            anc[v] = anc[v >> 1] * self.phi[v]
        for v in range(1, 2 * p):
            lhs = self.psi[v] * anc[v]
            ref = subtree[v]
            if abs(lhs - ref) > tol * max(1.0, abs(ref)):
                raise AssertionError(
                    f"invariant violated at node {v}: {lhs} vs {ref}")


@njit(cache=True)
def _forest_query(phi, psi, leaf, out):
    n_centers, n_actions, _ = phi.shape
    for c in range(n_centers):
        v0 = leaf[c]
        for k in range(n_actions):
            sigma = psi[c, k, v0] * phi[c, k, v0]
            v = v0
            while v > 1:
                parent = v >> 1
                if v & 1 == 0:
                    sib = v + 1
                    sigma = phi[c, k, parent] * (sigma + psi[c, k, sib] * phi[c, k, sib])
                else:
                    sigma = phi[c, k, parent] * sigma
                v = parent
            out[c, k] = sigma


@njit(cache=True)
def _forest_update(phi, psi, leaf, factors):
    n_centers, n_actions, _ = phi.shape
    drift = 0
    for c in range(n_centers):
        leaf_idx = leaf[c]
        depth = 0
        t = leaf_idx
        while t > 1:
            t >>= 1
            depth += 1
        for k in range(n_actions):
            u = factors[k]
            for shift in range(depth, 0, -1):
                g = leaf_idx >> shift
                pg = phi[c, k, g]
                if pg != 1.0:
                    phi[c, k, 2 * g] *= pg
                    phi[c, k, 2 * g + 1] *= pg
                    phi[c, k, g] = 1.0
            for shift in range(depth, 0, -1):
                g = leaf_idx >> shift
                if leaf_idx >> (shift - 1) == 2 * g:
                    val = phi[c, k, 2 * g + 1] * u
                    phi[c, k, 2 * g + 1] = val
                    if val < PHI_MIN or val > PHI_MAX:
                        drift = 1
            val = phi[c, k, leaf_idx] * u
            phi[c, k, leaf_idx] = val
            if val < PHI_MIN or val > PHI_MAX:
                drift = 1
            g = leaf_idx >> 1
            while g >= 1:
                psi[c, k, g] = (psi[c, k, 2 * g] * phi[c, k, 2 * g]
                                + psi[c, k, 2 * g + 1] * phi[c, k, 2 * g + 1])
                g >>= 1
    return drift


@njit(cache=True)
def _forest_leaf_values(phi, psi, out):
    n_centers, n_actions, two_p = phi.shape
    p = two_p >> 1
    for c in range(n_centers):
        for k in range(n_actions):
            for pos in range(p):
                v = p + pos
                val = psi[c, k, v]
                while v >= 1:
                    val *= phi[c, k, v]
                    v >>= 1
                out[c, k, pos] = val


@njit(cache=True)
def _forest_rebuild(phi, psi, leaves):
    n_centers, n_actions, p = leaves.shape
    for c in range(n_centers):
        for k in range(n_actions):
            for v in range(2 * p):
                phi[c, k, v] = 1.0
                psi[c, k, v] = 0.0
            for pos in range(p):
                psi[c, k, p + pos] = leaves[c, k, pos]
            for v in range(p - 1, 0, -1):
                psi[c, k, v] = psi[c, k, 2 * v] + psi[c, k, 2 * v + 1]


class SuffixProductForest:
    """All (center, action) suffix trees of one learner, batched.

    Every tree has the same shape; only the leaf order differs per center.
    Queries and updates take the per-center leaf position of the current
    context and run the single-tree algorithms over the whole batch.  When
    any lazy multiplier drifts out of the safe floating-point range the
    affected state is rebuilt from explicit leaf values (O(N), amortized
    negligible).
    """

    def __init__(self, n_centers: int, n_actions: int, n_contexts: int,
                 initial_value: float):
        if n_contexts < 1 or n_centers < 1 or n_actions < 1:
            raise ValueError("forest dimensions must be positive")
        if not (initial_value > 0.0) or not np.isfinite(initial_value):
            raise ValueError("initial leaf value must be positive and finite")
        self.n_centers = n_centers
        self.n_actions = n_actions
        self.n_contexts = n_contexts
        self.n_leaves = _padded_size(n_contexts)
        p = self.n_leaves
        self.phi = np.ones((n_centers, n_actions, 2 * p))
        self.psi = np.zeros((n_centers, n_actions, 2 * p))
        leaves = np.zeros((n_centers, n_actions, p))
        leaves[:, :, :n_contexts] = initial_value
        _forest_rebuild(self.phi, self.psi, leaves)
        self.rebuilds = 0

    def _leaf_indices(self, positions: np.ndarray) -> np.ndarray:
        return positions + self.n_leaves

    def query_all(self, positions: np.ndarray) -> np.ndarray:
        """Suffix sums at the given per-center positions; shape (C, K)."""
        out = np.empty((self.n_centers, self.n_actions))
        _forest_query(self.phi, self.psi, self._leaf_indices(positions), out)
        return out

    def update_all(self, positions: np.ndarray, factors: np.ndarray):
        """Multiply each tree's suffix at the per-center position by the
        per-action factor."""
        drift = _forest_update(self.phi, self.psi,
                               self._leaf_indices(positions), factors)
        if drift:
            self._rebuild()

    def leaf_values(self) -> np.ndarray:
        """Explicit leaf values, shape (C, K, padded N)."""
        out = np.empty((self.n_centers, self.n_actions, self.n_leaves))
        _forest_leaf_values(self.phi, self.psi, out)
        return out

    def _rebuild(self):
        leaves = self.leaf_values()
        _forest_rebuild(self.phi, self.psi, leaves)
        self.rebuilds += 1
