"""Shared domain types for bandit learning with an abstention action.

Actions are integers: ``1..K`` are the foreground actions, ``ABSTAIN`` (0)
is the distinguished abstention action whose reward is always zero.  A
stochastic action is a sub-probability vector over the K foreground
actions; whatever mass is missing from 1 goes to abstention.
"""
from __future__ import annotations

import numpy as np

ABSTAIN = 0

# Tolerance absorbed by 1-norm checks; sums slightly above one (float
# summation error) are clamped back to the simplex boundary, never
# silently rescaled elsewhere.
SUM_TOL = 1e-9


def is_abstain(action: int) -> bool:
    return action == ABSTAIN


class StochasticAction:
    """Sub-probability vector over the K foreground actions.

    Entries lie in [0, 1] and sum to at most 1 (+ ``SUM_TOL``); the deficit
    ``1 - sum`` is the probability of abstaining.  Immutable after
    construction.
    """

    __slots__ = ("probs",)

    def __init__(self, probs, *, clamp: bool = False):
        arr = np.array(probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("stochastic action must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("stochastic action has non-finite entries")
        if clamp:
            arr = np.clip(arr, 0.0, 1.0)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("stochastic action entries must lie in [0, 1]")
        total = float(arr.sum())
        if total > 1.0 + SUM_TOL:
            raise ValueError(f"stochastic action mass {total} exceeds 1")
        if total > 1.0:
            # Clamp float noise back onto the simplex boundary.
            arr = arr / total
        arr.setflags(write=False)
        self.probs = arr

    @property
    def n_actions(self) -> int:
        return self.probs.size

    @property
    def confidence(self) -> float:
        """1-norm of the vector: total probability of playing a foreground action."""
        return min(float(self.probs.sum()), 1.0)

    @property
    def abstain_prob(self) -> float:
        return max(0.0, 1.0 - float(self.probs.sum()))

    def prob_of(self, action: int) -> float:
        """Probability of drawing ``action`` (foreground id or ABSTAIN)."""
        if action == ABSTAIN:
            return self.abstain_prob
        return float(self.probs[action - 1])

    def __repr__(self):
        return f"StochasticAction({self.probs.tolist()})"


class ExpertAdvice:
    """Per-trial advice of E experts, each row a stochastic action.

    ``rows`` is the (E, K) matrix of advice vectors; ``confidences`` holds
    the row 1-norms.  Rows whose sums exceed 1 by at most ``SUM_TOL`` are
    clamped to the boundary so stored confidences always lie in [0, 1] and
    equal the row sums exactly.
    """

    __slots__ = ("rows", "confidences")

    def __init__(self, rows):
        mat = np.array(rows, dtype=float)
        if mat.ndim == 1:
            mat = mat.reshape(1, -1)
        if mat.ndim != 2 or mat.shape[1] == 0:
            raise ValueError("advice must be an (E, K) matrix")
        if not np.all(np.isfinite(mat)):
            raise ValueError("advice has non-finite entries")
        if np.any(mat < 0.0) or np.any(mat > 1.0):
            raise ValueError("advice entries must lie in [0, 1]")
        sums = mat.sum(axis=1)
        if np.any(sums > 1.0 + SUM_TOL):
            bad = int(np.argmax(sums))
            raise ValueError(f"advice row {bad} has 1-norm {sums[bad]} > 1")
        over = sums > 1.0
        if np.any(over):
            mat[over] /= sums[over, None]
            sums = mat.sum(axis=1)
        mat.setflags(write=False)
        self.rows = mat
        conf = sums
        conf.setflags(write=False)
        self.confidences = conf

    @classmethod
    def from_actions(cls, actions) -> "ExpertAdvice":
        return cls(np.stack([a.probs for a in actions]))

    @property
    def n_experts(self) -> int:
        return self.rows.shape[0]

    @property
    def n_actions(self) -> int:
        return self.rows.shape[1]


class RewardVector:
    """Rewards of the K foreground actions on one trial, each in [-1, 1].

    The abstention action always has reward 0 and is therefore not stored.
    """

    __slots__ = ("rewards",)

    def __init__(self, rewards):
        arr = np.array(rewards, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("reward vector must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("reward vector has non-finite entries")
        if np.any(arr < -1.0) or np.any(arr > 1.0):
            raise ValueError("rewards must lie in [-1, 1]")
        arr.setflags(write=False)
        self.rewards = arr

    def reward_of(self, action: int) -> float:
        if action == ABSTAIN:
            return 0.0
        return float(self.rewards[action - 1])


def unnormalized_relative_entropy(u, v) -> float:
    """Bregman divergence of negative entropy on the positive orthant.

    Returns ``sum_i u_i ln(u_i / v_i) - |u|_1 + |v|_1`` with the usual
    convention 0 ln 0 = 0.  Requires u >= 0 and v > 0 elementwise.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be 1-d vectors of equal length")
    if np.any(u < 0.0):
        raise ValueError("u must be non-negative")
    if np.any(v <= 0.0):
        raise ValueError("v must be strictly positive")
    pos = u > 0.0
    up, vp = u[pos], v[pos]
    ratio = up / vp
    logr = np.empty_like(ratio)
    ok = ratio > 0.0
    logr[ok] = np.log(ratio[ok])
    # ratio underflowed to zero for a subnormal u entry: split the log
    logr[~ok] = np.log(up[~ok]) - np.log(vp[~ok])
    return float((up * logr).sum() - u.sum() + v.sum())


def sample_action(s: StochasticAction, rng: np.random.Generator) -> int:
    """Draw a foreground action with the probabilities in ``s``; abstain
    with the residual mass.  Deterministic given the rng state."""
    r = rng.random()
    acc = 0.0
    probs = s.probs
    for a in range(probs.size):
        acc += probs[a]
        if r < acc:
            return a + 1
    return ABSTAIN
