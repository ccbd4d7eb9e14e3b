"""Shared test oracles: a from-scratch run of the core learner over
explicitly materialized specialist experts, plus small instance builders."""
import numpy as np

from cba.bases import Basis
from cba.core import ABSTAIN, ExpertAdvice
from cba.engine import CbaConfig, CbaLearner


class EngineSpecialistOracle:
    """Feeds the core learner a dense advice matrix each trial.

    ``awake_experts(x)`` must yield the indices of experts awake at
    context x, grouped with their action; here experts are (slot, action)
    pairs laid out slot-major so slot lists are shared across actions.
    """

    def __init__(self, slots_awake_at, n_slots, n_actions, eta, w1, rng):
        self.slots_awake_at = slots_awake_at
        self.n_slots = n_slots
        self.k = n_actions
        cfg = CbaConfig(eta=eta, w1=np.full(n_slots * n_actions, w1))
        self.learner = CbaLearner(cfg, rng)
        self.last_probs = None
        self.last_abstain = None

    def step(self, x):
        k = self.k
        rows = np.zeros((self.n_slots * k, k))
        slots = self.slots_awake_at(x)
        if len(slots):
            base = np.asarray(slots, dtype=np.int64) * k
            idx = (base[:, None] + np.arange(k)).ravel()
            rows[idx, np.tile(np.arange(k), len(slots))] = 1.0
        dist, action = self.learner.select(ExpertAdvice(rows))
        self.last_probs = dist.probs
        self.last_abstain = dist.abstain_prob
        return action

    def feedback(self, r_obs):
        self.learner.feedback(r_obs)


def engine_oracle_for_orders(orders, n_actions, eta, w1, rng):
    """Oracle over the full (center, prefix, action) ball-expert family."""
    n = orders[0].n_contexts
    posmat = np.stack([o.positions() for o in orders])
    n_centers = posmat.shape[0]

    def slots_awake_at(x):
        # slot (c, j) is awake iff the prefix j contains x: j >= pos[c, x]
        mask = np.arange(n)[None, :] >= posmat[:, x][:, None]
        cs, js = np.nonzero(mask)
        return cs * n + js

    return EngineSpecialistOracle(slots_awake_at, n_centers * n, n_actions,
                                  eta, w1, rng)


def engine_oracle_for_basis(basis: Basis, n_contexts, n_actions, eta, w1, rng):
    """Oracle over (basis element, action) experts."""
    containing = [[] for _ in range(n_contexts)]
    for i, el in enumerate(basis.elements):
        for x in el:
            containing[x].append(i)
    containing = [np.asarray(ix, dtype=np.int64) for ix in containing]
    return EngineSpecialistOracle(lambda x: containing[x], len(basis),
                                  n_actions, eta, w1, rng)


def run_paired_trace(agents, horizon, n_contexts, n_actions, seed):
    """Drive several agents through identical context/reward streams and
    collect per-trial action-probability traces (K+1 columns: foreground
    probabilities plus abstention mass)."""
    traces = [np.zeros((horizon, n_actions + 1)) for _ in agents]
    rewards = [np.zeros(horizon) for _ in agents]
    ctx_rng = np.random.default_rng((seed, 1))
    reward_rng = np.random.default_rng((seed, 2))
    contexts = ctx_rng.integers(n_contexts, size=horizon)
    reward_mat = reward_rng.choice([-1.0, 1.0], size=(horizon, n_actions))
    for t in range(horizon):
        x = int(contexts[t])
        for i, agent in enumerate(agents):
            action = agent.step(x)
            probs = agent.last_probs
            traces[i][t, :n_actions] = probs
            traces[i][t, n_actions] = 1.0 - probs.sum()
            r = 0.0 if action == ABSTAIN else float(reward_mat[t, action - 1])
            agent.feedback(r)
            rewards[i][t] = r
    return traces, rewards
