"""The confidence-rated exponential-weights learner with abstention.

Per trial the learner:

1. projects its positive weight vector onto the set where the weighted
   confidence sum is at most one (entropic projection, solved by interval
   bisection over the Lagrange multiplier),
2. plays the stochastic action given by the projected linear combination
   of the experts' advice,
3. forms an importance-weighted reward estimate from the single observed
   reward, and
4. applies a multiplicative weight update driven by each expert's
   estimated gradient.

``project`` and ``reward_estimate`` are pure functions so they can be
tested in isolation; ``CbaLearner`` wires them into the trial loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, ExpertAdvice, StochasticAction, sample_action

PROJECTION_EXACT = "exact"
PROJECTION_CERTIFIED = "certified"


class NumericsError(RuntimeError):
    """Raised when weights become NaN/infinite or bisection cannot converge."""


@dataclass
class CbaConfig:
    """Parameters of the learner.

    ``eta`` is the learning rate in (0, 1); ``w1`` the initial positive
    weight vector.  In certified mode weights are clipped to
    ``certified_clip`` at the start of every trial and the projection
    multiplier is located to within a guaranteed number of bisection steps
    for horizon ``horizon``.
    """

    eta: float
    w1: np.ndarray
    projection_mode: str = PROJECTION_EXACT
    certified_clip: float | None = None
    horizon: int | None = None
    bisection_tol: float = 1e-10
    bisection_max_iters: int = 200

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        if not (0.0 < self.eta < 1.0):
            raise ValueError("eta must lie in (0, 1)")
        if self.w1.ndim != 1 or np.any(self.w1 <= 0.0):
            raise ValueError("w1 must be a strictly positive vector")
        if self.projection_mode not in (PROJECTION_EXACT, PROJECTION_CERTIFIED):
            raise ValueError(f"unknown projection mode {self.projection_mode!r}")
        if self.projection_mode == PROJECTION_CERTIFIED:
            if self.certified_clip is None or self.horizon is None:
                raise ValueError("certified mode needs certified_clip and horizon")
            if self.certified_clip < float(self.w1.max()):
                raise ValueError("certified_clip must be >= max(w1)")
            if self.horizon < 1:
                raise ValueError("horizon must be positive")
        if self.bisection_tol <= 0.0 or self.bisection_max_iters < 1:
            raise ValueError("bad bisection parameters")


def project(
    w,
    c,
    mode: str = PROJECTION_EXACT,
    tol: float = 1e-10,
    max_iters: int = 200,
    clip: float | None = None,
    horizon: int | None = None,
):
    """Entropic projection of ``w`` onto the confidence constraint.

    Returns ``(w_tilde, lam, iters)`` where ``w_tilde = w * exp(-lam * c)``
    and ``iters`` counts constraint-function evaluations.  If the weighted
    confidence sum is already at most one the projection is the identity
    (lam = 0, zero iterations).

    Exact mode brackets the multiplier (doubling from 1) and bisects until
    the constraint sum is within ``tol`` of one.  Certified mode first
    clips ``w`` to [0, clip] and then bisects inside
    ``[0, clip * E * ln(clip * E)]`` until the sum lands in
    ``[1 - 1/horizon, 1]``, which takes O(ln(E * clip * horizon)) steps.
    """
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    if w.shape != c.shape or w.ndim != 1:
        raise ValueError("w and c must be 1-d vectors of equal length")
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("confidences must lie in [0, 1]")
    if mode == PROJECTION_CERTIFIED:
        if clip is None or horizon is None:
            raise ValueError("certified mode needs clip and horizon")
        w = np.minimum(w, clip)

    total = float(c @ w)
    if total <= 1.0:
        return w.copy(), 0.0, 0
    # Unreachable when all confidences are zero: the sum would be zero.
    assert np.any(c > 0.0)

    def f(lam):
        return float(c @ (w * np.exp(-lam * c)))

    if mode == PROJECTION_CERTIFIED:
        return _project_certified(w, c, f, clip, horizon, max_iters)

    nz = c[c > 0.0]
    if nz.min() == nz.max():
        # Single distinct positive confidence: the projection is exactly a
        # uniform rescale of the constrained weights.  Multiplying by the
        # reciprocal (rather than exp(-lam c)) keeps specialist-style runs
        # bit-compatible with the dedicated contextual implementations.
        cv = float(nz[0])
        scale = 1.0 / total
        w_tilde = np.where(c > 0.0, w * scale, w)
        return w_tilde, math.log(total) / cv, 0

    lo, hi = 0.0, 1.0
    iters = 0
    while f(hi) > 1.0:
        iters += 1
        lo, hi = hi, hi * 2.0
        if iters > max_iters:
            raise NumericsError("projection bracket did not close")
    while iters < max_iters:
        mid = 0.5 * (lo + hi)
        val = f(mid)
        iters += 1
        if abs(val - 1.0) <= tol:
            return w * np.exp(-mid * c), mid, iters
        if val > 1.0:
            lo = mid
        else:
            hi = mid
    raise NumericsError(f"projection bisection did not reach tol={tol} "
                        f"in {max_iters} iterations")


def _project_certified(w, c, f, clip, horizon, max_iters):
    # The constraint sum exceeds 1 only if clip * E > 1, in which case the
    # multiplier is guaranteed to lie in [0, clip * E * ln(clip * E)].
    n = w.size
    span = clip * n * math.log(clip * n)
    if span <= 0.0:
        raise ValueError("clip bound too small for the constraint to bind")
    target_lo = 1.0 - 1.0 / horizon
    lo, hi = 0.0, span
    val = f(hi)
    iters = 1
    if target_lo <= val <= 1.0:
        return w * np.exp(-hi * c), hi, iters
    while iters < max_iters:
        mid = 0.5 * (lo + hi)
        val = f(mid)
        iters += 1
        if target_lo <= val <= 1.0:
            return w * np.exp(-mid * c), mid, iters
        if val > 1.0:
            lo = mid
        else:
            hi = mid
    raise NumericsError("certified projection did not land in the target "
                        f"interval within {max_iters} iterations")


def reward_estimate(s: StochasticAction, action: int, r_obs: float) -> np.ndarray:
    """Importance-weighted estimate of the full reward vector.

    ``r_hat[a] = 1 - 1{a == action} * (1 - r_obs) / P(action)`` for
    foreground actions; after an abstention every component is 1.  The
    estimate is unbiased under the draw ``action ~ s``.
    """
    k = s.n_actions
    r_hat = np.ones(k)
    if action == ABSTAIN:
        return r_hat
    p = s.prob_of(action)
    if p <= 0.0:
        raise ValueError(f"observed action {action} has zero probability")
    r_hat[action - 1] = 1.0 - (1.0 - r_obs) / p
    return r_hat


@dataclass
class _ProjectionStats:
    calls: int = 0
    total_iters: int = 0
    max_iters: int = 0

    def record(self, iters: int):
        self.calls += 1
        self.total_iters += iters
        self.max_iters = max(self.max_iters, iters)

    def summary(self) -> dict:
        mean = self.total_iters / self.calls if self.calls else 0.0
        return {"calls": self.calls, "max_iters": self.max_iters,
                "mean_iters": mean}


class CbaLearner:
    """Stateful trial loop around ``project`` / ``reward_estimate``.

    One instance per learner; ``select`` and the following ``feedback``
    (or ``update``) form one trial.  Weights stay strictly positive; any
    NaN or infinity aborts with ``NumericsError`` rather than being
    sanitized.
    """

    def __init__(self, config: CbaConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.weights = config.w1.copy()
        self.trial = 0
        self.projection_stats = _ProjectionStats()
        self._advice: ExpertAdvice | None = None
        self._projected: np.ndarray | None = None
        self._action_dist: StochasticAction | None = None
        self._action: int | None = None

    @property
    def n_experts(self) -> int:
        return self.weights.size

    @property
    def projected(self) -> np.ndarray | None:
        """Projected weights of the trial in flight (None between trials)."""
        return self._projected

    @property
    def last_action_dist(self) -> StochasticAction | None:
        return self._action_dist

    def select(self, advice: ExpertAdvice):
        """Project, combine the advice, draw an action.  Returns
        ``(StochasticAction, action_id)``."""
        if self._advice is not None:
            raise RuntimeError("select called twice without feedback")
        if advice.n_experts != self.n_experts:
            raise ValueError("advice expert count does not match weights")
        cfg = self.config
        if cfg.projection_mode == PROJECTION_CERTIFIED:
            np.minimum(self.weights, cfg.certified_clip, out=self.weights)
        w_tilde, _lam, iters = project(
            self.weights,
            advice.confidences,
            mode=cfg.projection_mode,
            tol=cfg.bisection_tol,
            max_iters=cfg.bisection_max_iters,
            clip=cfg.certified_clip,
            horizon=cfg.horizon,
        )
        self.projection_stats.record(iters)
        s = StochasticAction(advice.rows.T @ w_tilde, clamp=True)
        action = sample_action(s, self.rng)
        self._advice = advice
        self._projected = w_tilde
        self._action_dist = s
        self._action = action
        return s, action

    def update(self, r_hat: np.ndarray):
        """Multiplicative update from an explicit reward estimate."""
        if self._advice is None:
            raise RuntimeError("update called before select")
        gradients = self._advice.rows @ r_hat
        new_w = self._projected * np.exp(self.config.eta * gradients)
        if not np.all(np.isfinite(new_w)):
            raise NumericsError(f"non-finite weights at trial {self.trial + 1}")
        self.weights = new_w
        self.trial += 1
        self._advice = None
        self._projected = None

    def feedback(self, r_obs: float):
        """Complete the trial with the observed reward of the drawn action."""
        if self._advice is None:
            raise RuntimeError("feedback called before select")
        if self._action == ABSTAIN and r_obs != 0.0:
            raise ValueError("abstention reward must be zero")
        r_hat = reward_estimate(self._action_dist, self._action, r_obs)
        self.update(r_hat)
