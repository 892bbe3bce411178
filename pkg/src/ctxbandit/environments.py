"""Contextual loss families, context processes and minimizer oracles.

Two loss families are provided:

``ContextualQuadratic``
    ``f(x, c) = alpha/2 |x - m(c)|^2 + b(c)`` with a Hölder target map
    ``m(c) = clip(A c^gamma + v)``; a benchmark with closed-form minimizers.

``LowerBoundFamily``
    The hard instance built from the smooth bump: a strongly convex bowl
    ``alpha |x|^2`` tilted along ``x_1`` by a sign ``omega_j`` per context cell
    (scaled by the distance of the context to its cell boundary) and along
    the remaining coordinates by fixed signs ``tau_i``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_context, check_points, check_vector
from .conversion import Partition
from .exceptions import CertificationFailed, ExhaustedSequence, NotInCell, OracleFailure
from .geometry import Ball
from .mollifier import eta, eta0, eta0_prime, eta_second_derivative_bound, eta_total
from .randomness import SeedStream

STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class LossConstants:
    alpha: float
    beta: float
    M: float
    L: float
    gamma: float


@dataclass(frozen=True)
class CertificationReport:
    n_pairs: int
    holder_ratio: float
    hess_min: float
    hess_max: float
    sup_abs: float
    constants: LossConstants


# ---------------------------------------------------------------------------
# Smooth minimization helpers
# ---------------------------------------------------------------------------

def newton_minimize(fun, grad, hess, x0, tol=1e-12, max_iter=100):
    """Unconstrained Newton with Armijo backtracking for a strongly convex function."""
    x = np.array(x0, dtype=float)
    g = grad(x)
    if np.linalg.norm(g) <= tol:
        return x
    fx = fun(x)
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= tol:
            return x
        step = np.linalg.solve(hess(x), g)
        slope = float(g @ step)
        a = 1.0
        while True:
            cand = x - a * step
            fc = fun(cand)
            if fc <= fx - 1e-4 * a * slope or a < 1e-12:
                break
            a *= 0.5
        x, fx = cand, fc
    if np.linalg.norm(grad(x)) <= max(tol, STATIONARITY_TOL):
        return x
    raise OracleFailure(f"Newton polish stalled at gradient norm {np.linalg.norm(grad(x)):.3e}")


def projected_gradient(fun, grad, x0, body, step, tol=1e-12, max_iter=100_000):
    """Projected gradient descent with fixed step ``1/beta`` for a constrained minimum."""
    x = body.project(np.asarray(x0, dtype=float))
    for _ in range(max_iter):
        nxt = body.project(x - step * grad(x))
        if np.linalg.norm(nxt - x) <= tol:
            return nxt
        x = nxt
    raise OracleFailure("projected gradient did not converge")


def minimize_on_body(fun, grad, hess, body, starts, beta):
    """Minimum of a smooth strongly convex function over ``body``.

    Newton from every start; if the unconstrained minimizer is infeasible,
    fall back to projected gradient from the best feasible start.
    """
    best = None
    for x0 in starts:
        try:
            x = newton_minimize(fun, grad, hess, x0)
        except (OracleFailure, np.linalg.LinAlgError):
            continue
        if best is None or fun(x) < fun(best):
            best = x
    if best is not None and body.contains(best):
        return best
    feasible = [body.project(s) for s in starts]
    x0 = min(feasible, key=fun)
    return projected_gradient(fun, grad, x0, body, 1.0 / beta)


# ---------------------------------------------------------------------------
# Quadratic benchmark family
# ---------------------------------------------------------------------------

class ContextualQuadratic:
    """``f(x, c) = alpha/2 |x - m(c)|^2 + b(c)`` over a convex body.

    Parameters
    ----------
    body : Ball or Polytope
    alpha : float
        Curvature (both strong convexity and smoothness).
    A : array of shape (d, p)
        Linear part of the target map, applied to ``c^gamma`` coordinatewise.
    v : array of shape (d,)
        Offset of the target map.
    gamma : float
        Hölder exponent in the context.
    offset, offset_coef : float, array of shape (p,)
        ``b(c) = offset + <offset_coef, c^gamma>``.
    clip : float or None
        Targets are projected onto the body shrunk by this factor about its
        center; None leaves them unclipped (minimizers may sit on the boundary).
    L : float
        Declared Hölder constant, checked on sampled pairs at construction.
    M : float or None
        Declared bound on ``|f|`` over the body (default: a diameter bound).
    """

    kind = "quadratic"

    def __init__(self, body, alpha=1.0, A=None, v=None, gamma=1.0, offset=0.0,
                 offset_coef=None, clip=0.9, L=1.0, M=None, certify_pairs=2000):
        self.body = body
        d = body.dim
        self.alpha = float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.A = check_points(np.zeros((d, 1)) if A is None else A, d if A is None else None, name="A")
        if self.A.shape[0] != d:
            raise ValueError(f"A must have {d} rows")
        self.p = self.A.shape[1]
        self.d = d
        self.v = np.zeros(d) if v is None else check_vector(v, d, name="v")
        self.gamma = float(gamma)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        self.offset = float(offset)
        self.offset_coef = np.zeros(self.p) if offset_coef is None else check_vector(offset_coef, self.p)
        self.clip = clip
        self._target_body = None if clip is None else body.scaled(float(clip))
        lo, hi = body.bounding_box
        diam = float(np.linalg.norm(hi - lo))
        bmax = abs(self.offset) + float(np.abs(self.offset_coef).sum())
        self.M = 0.5 * self.alpha * diam ** 2 + bmax if M is None else float(M)
        self.L = float(L)
        self.constants = LossConstants(self.alpha, self.alpha, self.M, self.L, self.gamma)
        if certify_pairs:
            ratio, witness = self._holder_ratio(certify_pairs, np.random.default_rng(20240601))
            if ratio > self.L * (1 + 1e-6):
                raise CertificationFailed(
                    f"sampled Hölder ratio {ratio:.6g} exceeds declared L={self.L}", witness)

    def _phi(self, c):
        return np.asarray(c, dtype=float) ** self.gamma

    def target(self, c):
        """Unconstrained minimizer m(c)."""
        m = self.A @ self._phi(c) + self.v
        return m if self._target_body is None else self._target_body.project(m)

    def offset_at(self, c):
        return self.offset + float(self.offset_coef @ self._phi(c))

    def value(self, x, c):
        x = np.asarray(x, dtype=float)
        diff = x - self.target(c)
        sq = np.einsum("...i,...i->...", diff, diff)
        out = 0.5 * self.alpha * sq + self.offset_at(c)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = value

    def gradient(self, x, c):
        return self.alpha * (np.asarray(x, dtype=float) - self.target(c))

    def hessian(self, x, c):
        return self.alpha * np.eye(self.d)

    def minimizer(self, c):
        x = self.body.project(self.target(c))
        return x, self.value(x, c)

    def round_values(self, z, c):
        """``(f(z, c), min_x f(x, c))`` for one round."""
        m = self.target(c)
        b = self.offset_at(c)
        x = self.body.project(m)
        return (0.5 * self.alpha * float((z - m) @ (z - m)) + b,
                0.5 * self.alpha * float((x - m) @ (x - m)) + b)

    def static_comparator(self, C):
        """Best fixed action for the context rows ``C`` and its summed loss."""
        C = check_points(C, self.p, name="C")
        mean_target = np.mean([self.target(c) for c in C], axis=0)
        z = self.body.project(mean_target)
        return z, float(sum(self.value(z, c) for c in C))

    def _holder_ratio(self, n, rng):
        worst, witness = 0.0, None
        C1, C2 = _context_pairs(n, self.p, rng)
        ball = isinstance(self.body, Ball)
        xs = None if ball else self.body.sample_interior(64, rng)
        for c, c2 in zip(C1, C2):
            dist = float(np.linalg.norm(c - c2))
            if dist == 0.0:
                continue
            m1, m2 = self.target(c), self.target(c2)
            const = 0.5 * self.alpha * (m1 @ m1 - m2 @ m2) + self.offset_at(c) - self.offset_at(c2)
            dm = m1 - m2
            if ball:
                # f(x,c) - f(x,c') is affine in x, so its sup over the ball is explicit
                sup = abs(const - self.alpha * self.body.center @ dm) \
                    + self.alpha * self.body.radius * np.linalg.norm(dm)
            else:
                sup = float(np.max(np.abs(const - self.alpha * xs @ dm)))
            ratio = sup / dist ** self.gamma
            if ratio > worst:
                worst, witness = ratio, {"c": c.tolist(), "c_prime": c2.tolist()}
        return worst, witness

    def to_dict(self):
        return {"kind": "quadratic", "alpha": self.alpha, "A": self.A.tolist(), "v": self.v.tolist(),
                "gamma": self.gamma, "offset": self.offset, "clip": self.clip, "L": self.L, "M": self.M}


# ---------------------------------------------------------------------------
# Lower-bound family
# ---------------------------------------------------------------------------

def admissible_radii(alpha, L):
    """Largest ``(r1, r2)`` keeping the family in its declared class.

    Collects the smallness conditions on the two tilt amplitudes: Hölder
    continuity in the context, Hessian spectrum in ``[alpha, 3 alpha]`` and
    the closed-form minimizer staying in its linear regime.
    """
    mass = eta_total()
    curv = eta_second_derivative_bound()
    Lm = max(1.0, L)
    scale = 1.0 if L <= 1.0 else 1.0 / L ** 2
    r1 = min(scale * min(1.0 / (2.0 * mass), alpha / curv),
             alpha / (2.0 * Lm),
             1.0 / (2.0 * mass * Lm),
             alpha / (curv * Lm))
    r2 = min(1.0 / (2.0 * mass), alpha / curv, alpha / 2.0)
    return r1, r2


def _signs(n, stream):
    return stream.generator().choice(np.array([-1.0, 1.0]), size=n)


class LowerBoundFamily:
    """Hard contextual family on the unit ball of R^d.

    ``f(x, c) = alpha |x|^2 + r1 L eta(x_1 delta^{-gamma/2}) omega_j dist(c, dB_j)^gamma
    + r2 h^2 sum_{i>=2} tau_i eta(x_i / h)`` for ``c`` in cell ``B_j``, with
    ``delta = 1/(2K)`` and ``h = min(d^{-1/2}, T^{-1/4})``.

    ``gamma = 0`` gives the discontinuous variant in which the distance
    factor is replaced by 1 (bounded jumps of size at most L).
    """

    def __init__(self, d, p, K, T, alpha=1.0, L=1.0, gamma=1.0, r1=None, r2=None,
                 omega=None, tau=None, omega_seed=0, tau_seed=1, M=None, check=True):
        self.d, self.p, self.K, self.T = int(d), int(p), int(K), int(T)
        self.alpha, self.L, self.gamma = float(alpha), float(L), float(gamma)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.body = Ball.unit(self.d)
        self.partition = Partition(self.p, self.K)
        self.delta = 1.0 / (2.0 * self.K)
        self.h = min(self.d ** -0.5, self.T ** -0.25)
        r1_max, r2_max = admissible_radii(self.alpha, self.L)
        self.r1 = r1_max if r1 is None else float(r1)
        self.r2 = r2_max if r2 is None else float(r2)
        if check and (self.r1 > r1_max * (1 + 1e-12) or self.r2 > r2_max * (1 + 1e-12)):
            raise ValueError(f"(r1, r2)=({self.r1}, {self.r2}) violate admissibility "
                             f"(r1 <= {r1_max:.6g}, r2 <= {r2_max:.6g})")
        n = self.partition.n_cells
        self.omega = (_signs(n, SeedStream(omega_seed, ("omega",))) if omega is None
                      else check_vector(omega, n, name="omega"))
        self.tau = (_signs(self.d - 1, SeedStream(tau_seed, ("tau",))) if tau is None
                    else check_vector(tau, self.d - 1, name="tau"))
        mass = eta_total()
        self.M = (self.alpha + self.r1 * self.L * mass + self.r2 * mass) if M is None else float(M)
        # beta: the Hessian spectrum sits in [alpha, 3 alpha] under admissibility
        self.constants = LossConstants(self.alpha, 3.0 * self.alpha, self.M, self.L, self.gamma)
        self._x1_scale = self.delta ** (-self.gamma / 2.0)

    def context_weight(self, c):
        """``omega_j dist(c, dB_j)^gamma`` for the cell j owning ``c``."""
        cell = self.partition.cell_of(c)
        if self.gamma == 0.0:
            return float(self.omega[cell])
        return float(self.omega[cell]) * dist_to_cell_boundary(self.partition, cell, c) ** self.gamma

    def _scaled_args(self, x):
        # eta arguments: x_1 stretched by delta^{-gamma/2}, the rest shrunk by h
        args = x / self.h
        args[..., 0] = x[..., 0] * self._x1_scale
        return args

    def _value_given_weight(self, x, S):
        x = np.asarray(x, dtype=float)
        e = eta(self._scaled_args(x))
        out = (self.alpha * np.einsum("...i,...i->...", x, x)
               + self.r1 * self.L * S * e[..., 0]
               + self.r2 * self.h ** 2 * (e[..., 1:] @ self.tau))
        return float(out) if np.ndim(out) == 0 else out

    def _grad_given_weight(self, x, S):
        x = np.asarray(x, dtype=float)
        e0 = eta0(self._scaled_args(x))
        g = 2.0 * self.alpha * x
        g[0] += self.r1 * self.L * S * self._x1_scale * e0[0]
        g[1:] += self.r2 * self.h * self.tau * e0[1:]
        return g

    def _hess_given_weight(self, x, S):
        x = np.asarray(x, dtype=float)
        e1 = eta0_prime(self._scaled_args(x))
        diag = np.full(self.d, 2.0 * self.alpha)
        diag[0] += self.r1 * self.L * S * self._x1_scale ** 2 * e1[0]
        diag[1:] += self.r2 * self.tau * e1[1:]
        return np.diag(diag)

    def value(self, x, c):
        return self._value_given_weight(x, self.context_weight(c))

    __call__ = value

    def gradient(self, x, c):
        return self._grad_given_weight(x, self.context_weight(c))

    def hessian(self, x, c):
        return self._hess_given_weight(x, self.context_weight(c))

    def _closed_form_given_weight(self, S):
        x = np.empty(self.d)
        x[0] = -0.5 / self.alpha * self._x1_scale * self.r1 * self.L * S
        x[1:] = -0.5 * self.tau * self.r2 / self.alpha * self.h
        args = np.concatenate([[x[0] * self._x1_scale], x[1:] / self.h])
        valid = bool(np.all(np.abs(args) <= 0.25) and x @ x <= 1.0)
        return x, valid

    def closed_form_minimizer(self, c):
        """Stationary point of the linear regime and whether that regime holds."""
        return self._closed_form_given_weight(self.context_weight(c))

    def _minimize_given_weight(self, S):
        fun = lambda u: self._value_given_weight(u, S)  # noqa: E731
        grad = lambda u: self._grad_given_weight(u, S)  # noqa: E731
        hess = lambda u: self._hess_given_weight(u, S)  # noqa: E731
        x, valid = self._closed_form_given_weight(S)
        if valid and np.linalg.norm(grad(x)) <= STATIONARITY_TOL:
            return x, fun(x)
        if valid:
            x = newton_minimize(fun, grad, hess, x)
        else:
            starts = [self.body.project(x), np.zeros(self.d)]
            starts += list(self.body.sample_interior(4, np.random.default_rng(7)))
            x = minimize_on_body(fun, grad, hess, self.body, starts, 3.0 * self.alpha)
        if self.body.contains(x, tol=0.0) and np.linalg.norm(grad(x)) > STATIONARITY_TOL:
            raise OracleFailure(f"minimizer not stationary: |grad|={np.linalg.norm(grad(x)):.3e}")
        return x, fun(x)

    def minimizer(self, c):
        return self._minimize_given_weight(self.context_weight(c))

    def round_values(self, z, c):
        """``(f(z, c), min_x f(x, c))`` for one round."""
        S = self.context_weight(c)
        return self._value_given_weight(z, S), self._minimize_given_weight(S)[1]

    def static_comparator(self, C):
        """Best fixed action for the rows of ``C``: the sum depends on C only via mean weight."""
        C = check_points(C, self.p, name="C")
        S = np.array([self.context_weight(c) for c in C])
        x, _ = self._minimize_given_weight(float(S.mean()))
        return x, float(sum(self._value_given_weight(x, s) for s in S))

    def to_dict(self):
        return {"kind": "lower_bound" if self.gamma > 0 else "lower_bound_gamma0",
                "alpha": self.alpha, "L": self.L, "gamma": self.gamma, "K": self.K, "T": self.T,
                "r1": self.r1, "r2": self.r2, "M": self.M}


def dist_to_cell_boundary(part, cell, c):
    """Euclidean distance from ``c`` (inside the closed cell) to the cell boundary."""
    lo, hi = part.bounds(cell)
    c = np.asarray(c, dtype=float)
    if np.any(c < lo) or np.any(c > hi):
        raise NotInCell(f"context {c.tolist()} is outside cell {cell}")
    return float(min(np.min(c - lo), np.min(hi - c)))


def loss_eval(model, x, c):
    return model.value(x, c)


def loss_min_oracle(model, c, body=None):
    """Per-context minimizer and minimum value ``(x*, f*)``."""
    return model.minimizer(c)


# ---------------------------------------------------------------------------
# Context processes
# ---------------------------------------------------------------------------

class FixedSequence:
    kind = "fixed"

    def __init__(self, values):
        self.values = check_points(values, name="values")
        self.p = self.values.shape[1]

    def sample(self, t, rng):
        if not 0 <= t < len(self.values):
            raise ExhaustedSequence(f"no context for round index {t}")
        return check_context(self.values[t], self.p)


class IIDUniform:
    kind = "iid_uniform"

    def __init__(self, p):
        self.p = int(p)

    def sample(self, t, rng):
        return rng.random(self.p)


class PKContexts:
    """Uniform cell, then uniform on the half-size cube around its barycenter."""

    kind = "pk"

    def __init__(self, p, K):
        self.p = int(p)
        self.K = int(K)
        self.partition = Partition(self.p, self.K)

    def sample(self, t, rng):
        cell = int(rng.integers(self.partition.n_cells))
        half = 1.0 / (4.0 * self.K)
        return self.partition.barycenter(cell) + rng.uniform(-half, half, self.p)


def sample_context(proc, part, t, rng):
    if isinstance(proc, PKContexts) and part is not None and part.K != proc.K:
        raise ValueError(f"P_K process has K={proc.K} but the partition has K={part.K}")
    return proc.sample(t, rng)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _context_pairs(n, p, rng):
    C1 = rng.random((n, p))
    C2 = rng.random((n, p))
    near = rng.random(n) < 0.5
    scale = 10.0 ** rng.uniform(-6.0, 0.0, n)
    direction = rng.standard_normal((n, p))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    C2[near] = np.clip(C1[near] + scale[near, None] * direction[near], 0.0, 1.0)
    return C1, C2


def certify_constants(model, n_pairs, rng):
    """Check the declared constants of ``model`` on sampled points.

    Over ``n_pairs`` sampled ``(x, c, c')``: the Hölder ratio
    ``|f(x,c) - f(x,c')| / |c - c'|^gamma`` must stay below ``L (1 + 1e-6)``,
    Hessian eigenvalues must lie in ``[alpha, beta]`` (``[alpha, 3 alpha]``
    for the lower-bound family) and ``|f| <= M``.  Returns the worst values
    seen or raises CertificationFailed with the witnessing sample.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    k = model.constants
    X = model.body.sample_interior(n_pairs, rng)
    C1, C2 = _context_pairs(n_pairs, model.p, rng)
    worst_ratio, hmin, hmax, sup_abs = 0.0, math.inf, -math.inf, 0.0
    for x, c, c2 in zip(X, C1, C2):
        f1, f2 = model.value(x, c), model.value(x, c2)
        dist = float(np.linalg.norm(c - c2))
        witness = {"x": x.tolist(), "c": c.tolist(), "c_prime": c2.tolist()}
        if dist > 0.0:
            denom = 1.0 if k.gamma == 0.0 else dist ** k.gamma
            ratio = abs(f1 - f2) / denom
            worst_ratio = max(worst_ratio, ratio)
            if ratio > k.L * (1 + 1e-6):
                raise CertificationFailed(f"Hölder ratio {ratio:.6g} exceeds L={k.L}", witness)
        ev = np.linalg.eigvalsh(model.hessian(x, c))
        hmin, hmax = min(hmin, ev[0]), max(hmax, ev[-1])
        if ev[0] < k.alpha * (1 - 1e-9) or ev[-1] > k.beta * (1 + 1e-9):
            raise CertificationFailed(
                f"Hessian spectrum [{ev[0]:.6g}, {ev[-1]:.6g}] leaves [{k.alpha}, {k.beta}]", witness)
        sup_abs = max(sup_abs, abs(f1), abs(f2))
        if max(abs(f1), abs(f2)) > k.M:
            raise CertificationFailed(f"|f| = {max(abs(f1), abs(f2)):.6g} exceeds M={k.M}", witness)
    return CertificationReport(n_pairs, worst_ratio, hmin, hmax, sup_abs, k)


# ---------------------------------------------------------------------------
# Config factories
# ---------------------------------------------------------------------------

def make_loss(spec, body, p, T):
    kind = spec.get("kind")
    if kind == "quadratic":
        return ContextualQuadratic(
            body, alpha=spec.get("alpha", 1.0), A=spec.get("A"), v=spec.get("v"),
            gamma=spec.get("gamma", 1.0), offset=spec.get("offset", 0.0),
            offset_coef=spec.get("offset_coef"), clip=spec.get("clip", 0.9),
            L=spec.get("L", 1.0), M=spec.get("M"))
    if kind in ("lower_bound", "lower_bound_gamma0"):
        gamma = 0.0 if kind == "lower_bound_gamma0" else spec.get("gamma", 1.0)
        K = spec.get("K", "auto")
        if K == "auto":
            K = lower_bound_K(spec.get("L", 1.0), gamma, p, T) if gamma > 0 else max(1, math.floor(T ** (1.0 / p)))
        return LowerBoundFamily(
            body.dim, p, int(K), T, alpha=spec.get("alpha", 1.0), L=spec.get("L", 1.0),
            gamma=gamma, r1=spec.get("r1"), r2=spec.get("r2"),
            omega_seed=spec.get("omega_seed", 0), tau_seed=spec.get("tau_seed", 1), M=spec.get("M"))
    raise ValueError(f"unknown loss kind {kind!r}")


def lower_bound_K(L, gamma, p, T):
    """Cells per axis of the hard instance: ``max(1, floor((min(1, L^2) T)^{1/(p + 2 gamma)}))``."""
    return max(1, math.floor((min(1.0, L * L) * T) ** (1.0 / (p + 2.0 * gamma))))


def make_context_process(spec, p):
    kind = spec.get("kind", "iid_uniform")
    if kind == "fixed":
        return FixedSequence(spec["values"])
    if kind == "iid_uniform":
        return IIDUniform(p)
    if kind == "pk":
        return PKContexts(p, int(spec["K"]))
    raise ValueError(f"unknown context kind {kind!r}")
