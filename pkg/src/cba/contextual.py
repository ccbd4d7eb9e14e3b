"""Contextual bandits with abstention on top of the core learner.

Experts are (context set, action) pairs: such a specialist advises its
action with full confidence whenever the current context lies in its set
and abstains otherwise.  Because confidences are 0/1, the entropic
projection collapses to uniformly scaling the awake experts' weights by
the inverse confidence sum, which both agents below exploit.

* ``DirectAgent`` materializes the expert weights and touches every awake
  expert each trial: O(K * E) per trial.
* ``FastBallAgent`` works on per-center distance orders.  The experts of
  one center form a nested prefix family, so the awake set at any context
  is a suffix of the center's leaf order; all per-trial work becomes
  suffix queries/updates on a tree forest: O(K * N * log N) per trial.

Both produce identical action-probability traces given the same seed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bases import Basis
from .core import StochasticAction, sample_action
from .engine import NumericsError, reward_estimate
from .tree import SuffixProductForest

ETA_FLOOR = 1e-4
ETA_CEIL = 1.0 - 1e-6


def tune(n_basis: int, m: int, k: int, horizon: int):
    """Learning rate and uniform initial weight for a basis of the given
    cardinality and a comparator of at most ``m`` disjoint pieces.

    Returns ``(eta, w1_scalar)`` with ``w1 = m / (n_basis * k)`` and
    ``eta = sqrt(m * ln(n_basis) / ((6k + 1) * horizon))`` clamped into
    (0, 1) with a floor of 1e-4 for degenerate parameters.
    """
    if n_basis < 1 or m < 1 or k < 1 or horizon < 1:
        raise ValueError("tune parameters must be positive")
    w1 = m / (n_basis * k)
    eta = math.sqrt(m * math.log(n_basis) / ((6 * k + 1) * horizon))
    if eta >= 1.0:
        warnings.warn(f"tuned eta {eta:.3g} >= 1, clamping", stacklevel=2)
        eta = ETA_CEIL
    return max(eta, ETA_FLOOR), w1


@dataclass
class ContextualConfig:
    """Instance description for the contextual agents.

    Exactly one of ``basis`` (arbitrary context sets) or ``orders``
    (per-center distance orders, enabling the fast agent) must be given.
    ``m`` is the comparator complexity used for tuning; ``eta_override``
    replaces the tuned learning rate when set.
    """

    n_actions: int
    horizon: int
    m: int = 1
    basis: Basis | None = None
    orders: list | None = None
    n_contexts: int | None = None
    eta_override: float | None = None

    def __post_init__(self):
        if self.n_actions < 1 or self.horizon < 1 or self.m < 1:
            raise ValueError("n_actions, horizon and m must be positive")
        if (self.basis is None) == (self.orders is None):
            raise ValueError("provide exactly one of basis or orders")
        if self.orders is not None:
            n = self.orders[0].n_contexts
            if any(o.n_contexts != n for o in self.orders):
                raise ValueError("inconsistent ball order sizes")
            if self.n_contexts is None:
                self.n_contexts = n
            elif self.n_contexts != n:
                raise ValueError("n_contexts does not match orders")
        else:
            top = max(max(el) for el in self.basis.elements)
            if self.n_contexts is None:
                self.n_contexts = top + 1
            elif self.n_contexts <= top:
                raise ValueError("basis references contexts beyond n_contexts")

    @property
    def experts_per_action(self) -> int:
        if self.basis is not None:
            return len(self.basis)
        return sum(o.n_contexts for o in self.orders)

    def parameters(self):
        eta, w1 = tune(self.experts_per_action, self.m, self.n_actions,
                       self.horizon)
        if self.eta_override is not None:
            eta = self.eta_override
        return eta, w1


def _positions_by_context(orders) -> np.ndarray:
    """(n_contexts, n_centers) array: row x holds the leaf position of
    context x in every center's order."""
    n = orders[0].n_contexts
    pos = np.empty((n, len(orders)), dtype=np.int64)
    for c, order in enumerate(orders):
        pos[order.order, c] = np.arange(n)
    return np.ascontiguousarray(pos)


class _SpecialistAgent:
    """Common trial loop of the contextual agents."""

    def __init__(self, config: ContextualConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.eta, self.w1 = config.parameters()
        self.trial = 0
        self.n_projections = 0
        self.last_probs: np.ndarray | None = None
        self.last_action_prob: float | None = None
        self._x = self._action = self._dist = None

    def _advice_sums(self, x: int) -> np.ndarray:
        raise NotImplementedError

    def _apply(self, x: int, factors: np.ndarray):
        raise NotImplementedError

    def step(self, x: int) -> int:
        if self._x is not None:
            raise RuntimeError("step called twice without feedback")
        if not 0 <= x < self.config.n_contexts:
            raise ValueError(f"context id {x} out of range")
        raw = self._advice_sums(x)
        total = float(raw.sum())
        if not np.isfinite(total):
            raise NumericsError(f"non-finite weights at trial {self.trial + 1}")
        if total > 1.0:
            # Projection: rescale the awake weights in place, then read the
            # action distribution back.  Kept as its own multiplicative
            # pass so all implementations share one weight trajectory.
            self.n_projections += 1
            self._apply(x, np.full(self.config.n_actions, 1.0 / total))
            probs = self._advice_sums(x)
        else:
            probs = raw
        dist = StochasticAction(probs, clamp=True)
        action = sample_action(dist, self.rng)
        self._x, self._dist, self._action = x, dist, action
        self.last_probs = dist.probs
        self.last_action_prob = dist.prob_of(action)
        return action

    def feedback(self, r_obs: float):
        if self._x is None:
            raise RuntimeError("feedback called before step")
        r_hat = reward_estimate(self._dist, self._action, r_obs)
        self._apply(self._x, np.exp(self.eta * r_hat))
        self.trial += 1
        self._x = None


@njit(cache=True)
def _prefix_sums(w, pos, out):
    n_centers, n_prefixes, n_actions = w.shape
    for c in range(n_centers):
        for j in range(pos[c], n_prefixes):
            for k in range(n_actions):
                out[k] += w[c, j, k]


@njit(cache=True)
def _prefix_apply(w, pos, factors):
    n_centers, n_prefixes, n_actions = w.shape
    for c in range(n_centers):
        for j in range(pos[c], n_prefixes):
            for k in range(n_actions):
                w[c, j, k] *= factors[k]


class DirectAgent(_SpecialistAgent):
    """Explicit-weight implementation touching every awake expert.

    With a plain basis the awake experts at context x are the elements
    containing x (precomputed incidence lists).  With ball orders they are
    the per-center order suffixes, i.e. the full O(N^2) prefix-ball expert
    family of the fast agent.
    """

    def __init__(self, config: ContextualConfig, rng: np.random.Generator):
        super().__init__(config, rng)
        k = config.n_actions
        if config.orders is not None:
            n = config.n_contexts
            self._pos = _positions_by_context(config.orders)
            self.weights = np.full((len(config.orders), n, k), self.w1)
            self._incidence = None
        else:
            self._pos = None
            self.weights = np.full((len(config.basis), k), self.w1)
            containing = [[] for _ in range(config.n_contexts)]
            for i, el in enumerate(config.basis.elements):
                for x in el:
                    containing[x].append(i)
            self._incidence = [np.asarray(ix, dtype=np.int64)
                               for ix in containing]

    @property
    def n_experts(self) -> int:
        return self.weights.size

    def _advice_sums(self, x):
        if self._pos is not None:
            out = np.zeros(self.config.n_actions)
            _prefix_sums(self.weights, self._pos[x], out)
            return out
        idx = self._incidence[x]
        if idx.size == 0:
            return np.zeros(self.config.n_actions)
        return self.weights[idx].sum(axis=0)

    def _apply(self, x, factors):
        if self._pos is not None:
            _prefix_apply(self.weights, self._pos[x], factors)
            return
        idx = self._incidence[x]
        if idx.size:
            self.weights[idx] *= factors


class FastBallAgent(_SpecialistAgent):
    """Tree-forest implementation for per-center nested ball families.

    One suffix tree per (center, action) holds the weights of that
    center's prefix-ball experts in leaf order.  The confidence sum is the
    total of one suffix query per tree; projection and the exponential
    update combine into one suffix multiplication per tree per trial.
    """

    def __init__(self, config: ContextualConfig, rng: np.random.Generator):
        if config.orders is None:
            raise ValueError("fast agent requires ball orders")
        super().__init__(config, rng)
        n = config.n_contexts
        self._pos = _positions_by_context(config.orders)
        self.forest = SuffixProductForest(
            n_centers=len(config.orders), n_actions=config.n_actions,
            n_contexts=n, initial_value=self.w1)

    @property
    def n_experts(self) -> int:
        return self.forest.n_centers * self.forest.n_contexts * self.forest.n_actions

    def _advice_sums(self, x):
        return self.forest.query_all(self._pos[x]).sum(axis=0)

    def _apply(self, x, factors):
        self.forest.update_all(self._pos[x], np.ascontiguousarray(factors))


@dataclass
class ComparatorPolicy:
    """Weighted (context set, action) pieces defining a benchmark policy.

    Overlaps are allowed as long as the weights covering any single
    context sum to at most one; the leftover mass abstains.
    """

    pieces: list

    def __post_init__(self):
        cover: dict[int, float] = {}
        for piece in self.pieces:
            el, action, weight = piece
            if action < 1:
                raise ValueError("piece actions must be foreground ids >= 1")
            if not 0.0 <= weight <= 1.0:
                raise ValueError("piece weights must lie in [0, 1]")
            for x in el:
                cover[x] = cover.get(x, 0.0) + weight
        bad = [x for x, u in cover.items() if u > 1.0 + 1e-9]
        if bad:
            raise ValueError(f"cover weights exceed 1 at contexts {sorted(bad)[:5]}")
        self.pieces = [(frozenset(el), int(a), float(u))
                       for el, a, u in self.pieces]

    def per_trial_reward(self, x: int, rewards) -> float:
        rewards = np.asarray(rewards, dtype=float)
        total = 0.0
        for el, action, weight in self.pieces:
            if x in el:
                total += weight * rewards[action - 1]
        return total


def comparator_reward(policy: ComparatorPolicy, trace) -> float:
    """Cumulative reward of the benchmark policy over a trace of
    (context, reward vector) pairs."""
    by_context: dict[int, list] = {}
    for el, action, weight in policy.pieces:
        for x in el:
            by_context.setdefault(x, []).append((action - 1, weight))
    total = 0.0
    for x, rewards in trace:
        for a_idx, weight in by_context.get(x, ()):
            total += weight * rewards[a_idx]
    return total
