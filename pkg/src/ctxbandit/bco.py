"""Noisy bandit convex optimization with a self-concordant barrier.

``BarrierBCO`` runs the barrier-regularized FTRL scheme for strongly convex,
smooth losses observed through a single noisy function value per round:

1. ``eta_t = min(1, sqrt(nu log(t+1) / t)) / (4 d q_T)`` with
   ``nu = 16 (mu + beta/alpha)`` and ``q_T = M + 2 sigma sqrt(log(T+1))``;
2. ``P_t = (hess R(x_{t-1}) + eta_t alpha t I)^{-1/2}``;
3. query ``z_t = x_{t-1} + P_t zeta_t`` for ``zeta_t`` uniform on the sphere;
4. ``g_t = d y_t P_t^{-1} zeta_t``;
5. ``x_t = argmin eta_t sum_k (<g_k, x> + alpha/2 |x - x_{k-1}|^2) + R(x)``.

The FTRL objective is kept as running sums, so a round costs O(d^2) memory
beyond the barrier regardless of t.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import NoPendingQuery, PendingQuery
from .geometry import NEWTON_MAX_ITER, NEWTON_TOL, damped_newton
from .randomness import as_stream, sample_sphere, sample_sphere_batch


@dataclass(frozen=True)
class BcoConfig:
    """Constants of the loss class and the run horizon.

    ``horizon_T`` may be None only for noiseless runs, where q_T = M and the
    algorithm does not need to know T.
    """

    alpha: float
    beta: float
    M: float
    sigma: float
    horizon_T: int
    barrier: object

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= self.alpha:
            raise ValueError("beta must be >= alpha")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.horizon_T is None:
            if self.sigma > 0:
                raise ValueError("a horizon is required when sigma > 0")
        elif int(self.horizon_T) < 1:
            raise ValueError("horizon_T must be a positive integer")

    @property
    def d(self):
        return self.barrier.dim

    @property
    def mu(self):
        return self.barrier.mu

    @property
    def nu(self):
        return 16.0 * (self.mu + self.beta / self.alpha)

    @property
    def q_T(self):
        if self.sigma == 0.0:
            return float(self.M)
        return self.M + 2.0 * self.sigma * math.sqrt(math.log(self.horizon_T + 1))


def step_size(t, cfg):
    """Step size eta_t for round ``t >= 1`` (natural logarithm)."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    return min(1.0, math.sqrt(cfg.nu * math.log(t + 1) / t)) / (4.0 * cfg.d * cfg.q_T)


def step_sizes(t, nu, d, q_T):
    """Vectorized step sizes for an integer array ``t``."""
    t = np.asarray(t, dtype=float)
    return np.minimum(1.0, np.sqrt(nu * np.log(t + 1.0) / t)) / (4.0 * d * q_T)


def perturbation(hess_R, eta_t, cfg, t, return_inverse=False):
    """Perturbation matrix ``(hess_R + eta_t alpha t I)^{-1/2}``."""
    from .geometry import inv_sqrt_psd

    shifted = np.asarray(hess_R, dtype=float) + eta_t * cfg.alpha * t * np.eye(hess_R.shape[0])
    return inv_sqrt_psd(shifted, return_inverse=return_inverse)


def gradient_estimate(y, zeta, P_inv):
    """One-point gradient estimate ``d y P^{-1} zeta``.

    Broadcasts over a leading batch axis: ``y`` of shape (n,) with ``zeta``
    of shape (n, d) yields n estimates as rows.
    """
    zeta = np.asarray(zeta, dtype=float)
    d = zeta.shape[-1]
    y = np.asarray(y, dtype=float)
    # P_inv is symmetric, so zeta @ P_inv == (P_inv @ zeta)^T row by row
    return d * y[..., None] * (zeta @ P_inv)


def ftrl_objective(barrier, u, sum_g, sum_x, sum_xx, t, eta, alpha):
    """Value of ``eta (<sum_g, u> + alpha/2 (t|u|^2 - 2<sum_x,u> + sum_xx)) + R(u)``."""
    u = np.asarray(u, dtype=float)
    lin = float(sum_g @ u)
    quad = 0.5 * alpha * (t * float(u @ u) - 2.0 * float(sum_x @ u) + sum_xx)
    return eta * (lin + quad) + barrier.value(u)


def ftrl_solve(barrier, sum_g, sum_x, t, eta, alpha, x0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Minimizer of the FTRL objective over the interior of the body.

    The constant ``sum_xx`` term does not move the minimizer and is omitted.
    Damped Newton is warm-started at ``x0``; the returned point has Newton
    decrement at most ``tol``.
    """
    shift = eta * alpha * t
    lin = eta * (sum_g - alpha * sum_x)
    x, _, _ = damped_newton(lambda u: barrier.newton_direction(u, lin, shift), x0,
                            tol=tol, max_iter=max_iter)
    return x


@dataclass(frozen=True)
class BcoRound:
    t: int
    z: np.ndarray
    y: float
    g: np.ndarray
    x: np.ndarray
    eta: float


@dataclass(frozen=True)
class _Pending:
    z: np.ndarray
    zeta: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    eta: float


class BarrierBCO(BaseEstimator):
    """Single-point bandit convex optimizer regularized by a barrier.

    Parameters
    ----------
    barrier : Barrier
        Self-concordant barrier of the feasible body.
    alpha, beta : float
        Strong convexity and smoothness constants of the losses
        (``beta`` defaults to ``alpha``).
    M : float
        Bound on ``|f|`` over the body.
    sigma : float
        Sub-Gaussian proxy of the observation noise.
    horizon : int or None
        Number of rounds T; only needed when ``sigma > 0``.
    random_state : int or SeedStream
        Source of the sphere directions.

    The interaction protocol is a strict alternation of ``propose`` and
    ``feed``; ``partial_fit`` does one full round against a value oracle.
    """

    def __init__(self, barrier, alpha=1.0, beta=None, M=1.0, sigma=0.0, horizon=None,
                 random_state=None):
        self.barrier = barrier
        self.alpha = alpha
        self.beta = beta
        self.M = M
        self.sigma = sigma
        self.horizon = horizon
        self.random_state = random_state

    @property
    def config(self):
        beta = self.alpha if self.beta is None else self.beta
        return BcoConfig(float(self.alpha), float(beta), float(self.M), float(self.sigma),
                         self.horizon, self.barrier)

    def reset(self):
        """Forget all rounds and return to the analytic center."""
        self.config_ = self.config
        d = self.barrier.dim
        self.x_ = self.barrier.center.copy()
        self.t_ = 0
        self.sum_g_ = np.zeros(d)
        self.sum_x_ = np.zeros(d)
        self.sum_xx_ = 0.0
        self.pending_ = None
        self.rng_ = as_stream(self.random_state).generator()
        return self

    def _ensure_started(self):
        if not hasattr(self, "t_"):
            self.reset()

    def propose(self, context=None):
        """Draw this round's query point (the context is ignored)."""
        self._ensure_started()
        if self.pending_ is not None:
            raise PendingQuery("propose() called twice without feed()")
        cfg = self.config_
        t = self.t_ + 1
        eta = step_size(t, cfg)
        P, P_inv = self.barrier.shifted_inv_sqrt(self.x_, eta * cfg.alpha * t)
        zeta = sample_sphere(cfg.d, self.rng_)
        z = self.x_ + P @ zeta
        self.pending_ = _Pending(z, zeta, P, P_inv, eta)
        return z

    def feed(self, y):
        """Consume the observed value of the pending query; return the round record."""
        pending = getattr(self, "pending_", None)
        if pending is None:
            raise NoPendingQuery("feed() called without a pending query")
        y = float(y)
        cfg = self.config_
        g = gradient_estimate(y, pending.zeta, pending.P_inv)
        x_prev = self.x_
        self.t_ += 1
        self.sum_g_ += g
        self.sum_x_ += x_prev
        self.sum_xx_ += float(x_prev @ x_prev)
        self.x_ = ftrl_solve(self.barrier, self.sum_g_, self.sum_x_, self.t_, pending.eta,
                             cfg.alpha, x_prev)
        self.pending_ = None
        return BcoRound(self.t_, pending.z, y, g, self.x_, pending.eta)

    def partial_fit(self, observe, context=None):
        """Play one round against ``observe(z) -> y``."""
        z = self.propose(context)
        return self.feed(observe(z))

    def fit(self, observe, n_rounds):
        """Reset, then play ``n_rounds`` rounds against ``observe``."""
        self.reset()
        self.history_ = [self.partial_fit(observe) for _ in range(int(n_rounds))]
        return self

    def predict(self, X=None):
        """Current iterate x_t, one row per row of ``X`` when given."""
        if not hasattr(self, "x_"):
            raise NotFittedError("BarrierBCO has not played any round yet")
        if X is None:
            return self.x_.copy()
        return np.tile(self.x_, (len(X), 1))


def bco_round(estimator, observe):
    """One full propose / query / feed round of ``estimator``."""
    return estimator.partial_fit(observe)


def mc_surrogate_gradient(f, x, A, n, rng, vectorized=True):
    """Monte Carlo gradient of the smoothed loss ``E f(x + A U)``.

    Averages ``d f(x + A zeta) A^{-1} zeta`` over ``n`` sphere directions.
    ``f`` maps an (n, d) array of points to n values when ``vectorized``,
    otherwise a single point to a float.  Returns ``(mean, standard_error)``;
    the standard error is infinite when ``n == 1``.
    """
    x = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float)
    d = x.shape[0]
    zeta = sample_sphere_batch(int(n), d, rng)
    pts = x + zeta @ A.T
    vals = np.asarray(f(pts) if vectorized else [f(p) for p in pts], dtype=float)
    samples = d * vals[:, None] * np.linalg.solve(A, zeta.T).T
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full(d, np.inf)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(n)
