"""Baseline learners: one exponential-weights bandit per context, and an
expert-advice bandit treating abstention as an extra arm.

Both use the classic gain-estimate variant with uniform exploration
mixing and the theory-optimal exploration rate for the given horizon, so
comparisons against the abstention-aware learner isolate the algorithm
rather than the tuning.
"""
from __future__ import annotations

import math

import numpy as np

from .bases import Basis
from .core import ABSTAIN, StochasticAction, sample_action
from .engine import NumericsError


def _exp3_gamma(n_arms: int, horizon: int) -> float:
    return min(1.0, math.sqrt(n_arms * math.log(n_arms)
                              / ((math.e - 1.0) * max(horizon, 1))))


class PerContextExp3:
    """Independent exponential-weights bandit per context over K+1 arms
    (arm 0 is abstention, fixed reward 0).

    Instances are created lazily on first visit; the importance-weighted
    gain estimate leaves the instance unchanged on zero-reward draws.
    """

    def __init__(self, n_actions: int, horizon: int, rng: np.random.Generator):
        if n_actions < 1:
            raise ValueError("need at least one foreground action")
        self.n_actions = n_actions
        self.gamma = _exp3_gamma(n_actions + 1, horizon)
        self.rng = rng
        self.weights: dict[int, np.ndarray] = {}
        self.visits: dict[int, int] = {}
        self.trial = 0
        self.last_probs: np.ndarray | None = None
        self.last_action_prob: float | None = None
        self._x = self._action = self._arm_probs = None

    def _instance(self, x: int) -> np.ndarray:
        if x not in self.weights:
            self.weights[x] = np.ones(self.n_actions + 1)
        return self.weights[x]

    def arm_distribution(self, x: int) -> np.ndarray:
        """Sampling distribution over the K+1 arms at context x."""
        w = self._instance(x)
        k1 = self.n_actions + 1
        return (1.0 - self.gamma) * w / w.sum() + self.gamma / k1

    def step(self, x: int) -> int:
        if self._x is not None:
            raise RuntimeError("step called twice without feedback")
        p = self.arm_distribution(x)
        dist = StochasticAction(p[1:], clamp=True)
        action = sample_action(dist, self.rng)
        self._x, self._action, self._arm_probs = x, action, p
        self.last_probs = dist.probs
        self.last_action_prob = float(p[action]) if action != ABSTAIN else float(p[0])
        return action

    def feedback(self, r_obs: float):
        if self._x is None:
            raise RuntimeError("feedback called before step")
        x, action = self._x, self._action
        if r_obs != 0.0:
            w = self._instance(x)
            est = r_obs / self._arm_probs[action]
            w[action] *= math.exp(self.gamma * est / (self.n_actions + 1))
            total = w.sum()
            if not np.isfinite(total):
                raise NumericsError(f"non-finite weights at trial {self.trial + 1}")
            w /= total
        self.visits[x] = self.visits.get(x, 0) + 1
        self.trial += 1
        self._x = None


class Exp4:
    """Expert-advice bandit over K+1 arms with uniform exploration.

    The experts are the same (basis element, action) specialists the
    abstention-aware learner uses, each advising a point mass on its
    action when the context lies in its set and on the abstention arm
    otherwise, plus one expert that always advises abstention.
    """

    def __init__(self, basis: Basis, n_actions: int, horizon: int,
                 n_contexts: int, rng: np.random.Generator):
        if n_actions < 1:
            raise ValueError("need at least one foreground action")
        self.n_actions = n_actions
        self.n_contexts = n_contexts
        self.rng = rng
        n_experts = len(basis) * n_actions + 1
        self.gamma = min(1.0, math.sqrt(
            (n_actions + 1) * math.log(n_experts)
            / ((math.e - 1.0) * max(horizon, 1))))
        # element weights (one row per basis element, one column per
        # action) plus the always-abstain expert's scalar weight
        self.weights = np.ones((len(basis), n_actions))
        self.abstain_weight = 1.0
        containing = [[] for _ in range(n_contexts)]
        for i, el in enumerate(basis.elements):
            for x in el:
                containing[x].append(i)
        self._incidence = [np.asarray(ix, dtype=np.int64) for ix in containing]
        self.trial = 0
        self.last_probs: np.ndarray | None = None
        self.last_action_prob: float | None = None
        self._x = self._action = self._arm_probs = None

    def _total_weight(self) -> float:
        return float(self.weights.sum()) + self.abstain_weight

    def arm_distribution(self, x: int) -> np.ndarray:
        """Sampling distribution over the K+1 arms at context x."""
        k1 = self.n_actions + 1
        total = self._total_weight()
        idx = self._incidence[x]
        awake = self.weights[idx].sum(axis=0) if idx.size else np.zeros(self.n_actions)
        p = np.empty(k1)
        p[1:] = awake
        p[0] = total - awake.sum()  # asleep experts and the abstain expert
        return (1.0 - self.gamma) * p / total + self.gamma / k1

    def step(self, x: int) -> int:
        if self._x is not None:
            raise RuntimeError("step called twice without feedback")
        if not 0 <= x < self.n_contexts:
            raise ValueError(f"context id {x} out of range")
        p = self.arm_distribution(x)
        dist = StochasticAction(p[1:], clamp=True)
        action = sample_action(dist, self.rng)
        self._x, self._action, self._arm_probs = x, action, p
        self.last_probs = dist.probs
        self.last_action_prob = float(p[action]) if action != ABSTAIN else float(p[0])
        return action

    def feedback(self, r_obs: float):
        if self._x is None:
            raise RuntimeError("feedback called before step")
        x, action = self._x, self._action
        # Only experts advising the played arm receive a non-zero gain
        # estimate; the abstention arm's reward is always 0.
        if action != ABSTAIN and r_obs != 0.0:
            est = r_obs / self._arm_probs[action]
            mult = math.exp(self.gamma * est / (self.n_actions + 1))
            idx = self._incidence[x]
            if idx.size:
                self.weights[idx, action - 1] *= mult
            total = self._total_weight()
            if not np.isfinite(total):
                raise NumericsError(f"non-finite weights at trial {self.trial + 1}")
            if total > 1e100:
                self.weights /= total
                self.abstain_weight /= total
        self.trial += 1
        self._x = None
