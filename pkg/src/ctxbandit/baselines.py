"""A finite-arm baseline: UCB over an epsilon-grid of the body.

The body is discretized by an axis grid of spacing ``eps`` anchored at an
interior point; grid points outside the body are dropped.  Each arm is a
grid point and losses are minimized with a lower-confidence index.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_positive
from .exceptions import NoPendingQuery, PendingQuery


@dataclass(frozen=True)
class EpsNet:
    points: np.ndarray
    eps: float

    @classmethod
    def build(cls, body, eps):
        check_positive(eps, "eps")
        lo, hi = body.bounding_box
        anchor = body.interior_point
        axes = []
        for a, l, h in zip(anchor, lo, hi):
            down = np.arange(a, l - 1e-12, -eps)[::-1]
            up = np.arange(a + eps, h + 1e-12, eps)
            axes.append(np.concatenate([down, up]))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, body.dim)
        keep = np.array([body.contains(x) for x in grid], dtype=bool)
        return cls(grid[keep], float(eps))

    def __len__(self):
        return len(self.points)


@dataclass
class UcbState:
    counts: np.ndarray
    means: np.ndarray
    t: int = 0

    @classmethod
    def empty(cls, n_arms):
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms))


def select_arm(state, t_local):
    """Lowest-index unpulled arm, else argmin of ``mean - sqrt(2 log t / n)``."""
    if t_local < 1:
        raise ValueError("t_local must be >= 1")
    unpulled = np.flatnonzero(state.counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    index = state.means - np.sqrt(2.0 * math.log(t_local) / state.counts)
    return int(np.argmin(index))  # argmin returns the first minimum


def update_arm(state, arm, y):
    state.counts[arm] += 1
    state.means[arm] += (float(y) - state.means[arm]) / state.counts[arm]
    return state


@dataclass(frozen=True)
class UcbRound:
    t: int
    arm: int
    z: np.ndarray
    y: float


class EpsNetUCB(BaseEstimator):
    """UCB over the epsilon-grid of a convex body.

    Parameters
    ----------
    body : Ball or Polytope
    eps : float
        Grid spacing.
    random_state : ignored
        Accepted so the estimator can be spawned per cell like any other.
    """

    def __init__(self, body, eps=0.25, random_state=None):
        self.body = body
        self.eps = eps
        self.random_state = random_state

    def reset(self):
        self.net_ = EpsNet.build(self.body, float(self.eps))
        self.state_ = UcbState.empty(len(self.net_))
        self.pending_ = None
        return self

    def _ensure_started(self):
        if not hasattr(self, "state_"):
            self.reset()

    @property
    def t_(self):
        return self.state_.t

    def propose(self, context=None):
        self._ensure_started()
        if self.pending_ is not None:
            raise PendingQuery("propose() called twice without feed()")
        self.pending_ = select_arm(self.state_, self.state_.t + 1)
        return self.net_.points[self.pending_].copy()

    def feed(self, y):
        arm = getattr(self, "pending_", None)
        if arm is None:
            raise NoPendingQuery("feed() called without a pending query")
        update_arm(self.state_, arm, y)
        self.state_.t += 1
        self.pending_ = None
        return UcbRound(self.state_.t, arm, self.net_.points[arm], float(y))

    def partial_fit(self, observe, context=None):
        z = self.propose(context)
        return self.feed(observe(z))

    def fit(self, observe, n_rounds):
        self.reset()
        self.history_ = [self.partial_fit(observe) for _ in range(int(n_rounds))]
        return self

    def predict(self, X=None):
        """Arm with the best empirical mean (the anchor before any pull)."""
        if not hasattr(self, "state_"):
            raise NotFittedError("EpsNetUCB has not played any round yet")
        pulled = self.state_.counts > 0
        if not pulled.any():
            best = self.body.interior_point
        else:
            means = np.where(pulled, self.state_.means, np.inf)
            best = self.net_.points[int(np.argmin(means))]
        return best.copy() if X is None else np.tile(best, (len(X), 1))
