"""Static-to-contextual conversion by partitioning the context cube.

The unit cube ``[0, 1]^p`` is tiled by ``K^p`` axis-aligned cells of edge
``1/K``.  ``ContextualRouter`` keeps one independent copy of an input
algorithm per visited cell and forwards each round to the copy owning the
round's context.  Each copy only ever sees its own cell's rounds, so its
internal round counter is the cell's visit count.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_context, check_points, check_positive_int
from .exceptions import NoPendingQuery, PendingQuery
from .randomness import as_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """Regular grid of ``K^p`` cells over ``[0, 1]^p``.

    Cells are half-open ``[i/K, (i+1)/K)`` per axis except the last, which is
    closed, so every point of the cube belongs to exactly one cell.  Flat
    indices are row-major over the per-axis indices.
    """

    p: int
    K: int

    def __post_init__(self):
        check_positive_int(self.p, "p")
        check_positive_int(self.K, "K")

    @property
    def n_cells(self):
        return self.K ** self.p

    @property
    def shape(self):
        return (self.K,) * self.p

    def axis_index(self, c):
        c = check_context(c, self.p)
        return tuple(int(i) for i in np.minimum(np.floor(self.K * c), self.K - 1).astype(int))

    def cell_of(self, c):
        return int(np.ravel_multi_index(self.axis_index(c), self.shape))

    def unravel(self, cell):
        return np.unravel_index(int(cell), self.shape)

    def bounds(self, cell):
        idx = np.asarray(self.unravel(cell), dtype=float)
        return idx / self.K, (idx + 1.0) / self.K

    def barycenter(self, cell):
        idx = np.asarray(self.unravel(cell), dtype=float)
        return (idx + 0.5) / self.K


def cell_of(part, c):
    return part.cell_of(c)


def barycenter(part, cell):
    return part.barycenter(cell)


@dataclass(frozen=True)
class ConversionParams:
    """Consistency exponents of the input algorithm plus the Hölder class.

    The input algorithm's static regret is assumed to grow like
    ``d^tau1 T^tau2 log^tau3(T+1)`` once ``T >= T0``.
    """

    tau1: float
    tau2: float
    tau3: float
    T0: float = 1.0
    L: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.tau2 < 1.0:
            raise ValueError("tau2 must lie in [0, 1)")
        if self.tau1 < 0 or self.tau3 < 0:
            raise ValueError("tau1 and tau3 must be non-negative")
        if not self.T0 >= 1.0:
            raise ValueError("T0 must be >= 1")
        if self.L < 0:
            raise ValueError("L must be non-negative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")

    @classmethod
    def strongly_convex(cls, rho=0.0, L=1.0, gamma=1.0, T0=1.0):
        """Exponents of the barrier BCO: ``(1 + rho/2, 1/2, 1)``."""
        return cls(1.0 + rho / 2.0, 0.5, 1.0, T0, L, gamma)


def choose_K(params, d, p, T):
    """Cells per axis balancing per-cell static regret against discretization bias."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if params.L == 0:
        return 1
    tau2 = params.tau2
    inner = (params.L * p ** (params.gamma / 2.0) * d ** (-params.tau1)
             * T ** (1.0 - tau2) * math.log(T + 1) ** (-params.tau3))
    return max(1, math.floor(inner ** (1.0 / (p * (1.0 - tau2) + params.gamma))))


def expected_bias_bound(L, gamma, p, K):
    """Per-round discretization bias envelope ``2 L (sqrt(p) / K)^gamma``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return 2.0 * L * (math.sqrt(p) / K) ** gamma


def spawn_instance(base, random_state, params=None):
    """A fresh, unstarted copy of ``base`` drawing from ``random_state``.

    Parameters are shared, not deep-copied: barriers and bodies are immutable.
    ``params`` may pass a cached ``base.get_params(deep=False)``.
    """
    params = dict(base.get_params(deep=False) if params is None else params)
    params["random_state"] = random_state
    return type(base)(**params)


@dataclass(frozen=True)
class RouterRound:
    t: int
    cell: int
    local_t: int
    c: np.ndarray
    record: object


class ContextualRouter(BaseEstimator):
    """Run one copy of ``base_estimator`` per visited context cell.

    Parameters
    ----------
    base_estimator : estimator
        Input algorithm exposing ``propose``/``feed``/``predict`` and a
        ``random_state`` parameter (e.g. ``BarrierBCO``).
    K : int
        Cells per context axis.
    p : int
        Context dimension.
    random_state : int or SeedStream
        Root stream; the copy for cell ``i`` draws from child ``"cell:i"``.
    """

    def __init__(self, base_estimator, K=1, p=1, random_state=None):
        self.base_estimator = base_estimator
        self.K = K
        self.p = p
        self.random_state = random_state

    def reset(self):
        self.partition_ = Partition(int(self.p), int(self.K))
        self.stream_ = as_stream(self.random_state)
        self.instances_ = {}
        self.counts_ = {}
        self._base_params = self.base_estimator.get_params(deep=False)
        self.total_rounds_ = 0
        self.pending_cell_ = None
        self._pending_c = None
        return self

    def _ensure_started(self):
        if not hasattr(self, "instances_"):
            self.reset()

    def cell_of(self, c):
        self._ensure_started()
        return self.partition_.cell_of(c)

    def instance(self, cell):
        """The input-algorithm copy for ``cell``, created on first use."""
        inst = self.instances_.get(cell)
        if inst is None:
            inst = spawn_instance(self.base_estimator, self.stream_.child(f"cell:{cell}"),
                                  self._base_params)
            self.instances_[cell] = inst
            self.counts_[cell] = 0
        return inst

    def propose(self, c):
        self._ensure_started()
        if self.pending_cell_ is not None:
            raise PendingQuery("propose() called twice without feed()")
        c = check_context(c, self.p)
        cell = self.partition_.cell_of(c)
        z = self.instance(cell).propose(c)
        self.pending_cell_ = cell
        self._pending_c = c
        return z

    def feed(self, y):
        cell = getattr(self, "pending_cell_", None)
        if cell is None:
            raise NoPendingQuery("feed() called without a pending query")
        record = self.instances_[cell].feed(y)
        self.counts_[cell] += 1
        self.total_rounds_ += 1
        self.pending_cell_ = None
        return RouterRound(self.total_rounds_, cell, self.counts_[cell], self._pending_c, record)

    def partial_fit(self, c, observe):
        """One round: route ``c``, query ``observe(z)``, feed the value back."""
        z = self.propose(c)
        return self.feed(observe(z))

    def fit(self, C, observe):
        """Reset and play one round per row of ``C`` against ``observe(z, c)``."""
        C = check_points(C, int(self.p), name="C")
        self.reset()
        self.history_ = [self.partial_fit(c, lambda z, c=c: observe(z, c)) for c in C]
        return self

    def predict(self, C):
        """Current iterate of the cell owning each row of ``C``.

        Unvisited cells report the starting point of a fresh input algorithm.
        """
        if not hasattr(self, "instances_"):
            raise NotFittedError("ContextualRouter has not played any round yet")
        C = check_points(C, int(self.p), name="C")
        rows = []
        for c in C:
            inst = self.instances_.get(self.partition_.cell_of(c))
            if inst is None:
                inst = spawn_instance(self.base_estimator, None)
            try:
                rows.append(inst.predict())
            except NotFittedError:
                rows.append(inst.reset().predict())
        return np.vstack(rows)

    @property
    def n_instances_(self):
        return len(self.instances_)


def warn_if_short_horizon(K, p, T, T0):
    """Log a warning when ``T < K^p T0`` (outside the tuned-K guarantee)."""
    if T < K ** p * T0:
        logger.warning("horizon T=%d is below K^p * T0 = %g; the tuned-K bound does not apply",
                       T, K ** p * T0)
        return True
    return False
