"""Convex bodies, self-concordant barriers and the Newton machinery on them.

Two body families are supported: Euclidean balls and polytopes given by
rows ``<a_j, u> >= b_j`` (boxes and simplices are convenience constructors).
Each body hands out its canonical barrier:

* ``Ball(c, r)``  ->  ``-log(r^2 - |u - c|^2)``, a 2-self-concordant barrier;
* ``Polytope(A, b)``  ->  ``-sum_j log(<a_j, u> - b_j)``, an m-self-concordant
  barrier where m is the number of rows.

Barrier values are normalized so that the minimum over the interior is 0.
"""

import functools
import math

import numpy as np
from scipy import linalg as sla
from scipy.optimize import linprog

from ._validation import check_points, check_positive, check_square, check_vector
from .exceptions import NoConvergence, NotInterior, NotPositiveDefinite

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
EIGEN_FLOOR = 1e-12
DIKIN_SLACK = 1e-12
MEMBERSHIP_TOL = 1e-12


# ---------------------------------------------------------------------------
# Linear algebra helpers
# ---------------------------------------------------------------------------

def newton_step(grad, hess):
    """Solve ``hess @ step = grad``; return ``(step, decrement)``.

    Used inside solver loops where the Hessian is positive definite by
    construction, so a plain LU solve is enough; an indefinite system still
    shows up as a negative or non-finite squared decrement.
    """
    try:
        step = np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("singular Newton system") from exc
    lam2 = float(grad @ step)
    if not lam2 >= 0.0:
        raise NotPositiveDefinite("Hessian is not positive definite")
    return step, math.sqrt(lam2)


def newton_decrement(grad, hess):
    """Newton decrement ``sqrt(grad^T hess^{-1} grad)`` via a Cholesky factor.

    Raises NotPositiveDefinite when ``hess`` admits no Cholesky factor.
    """
    grad = check_vector(grad, name="grad")
    hess = check_square(hess, name="hess")
    try:
        chol = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Hessian is not positive definite") from exc
    y = sla.solve_triangular(chol, grad, lower=True, check_finite=False)
    return math.sqrt(float(y @ y))


def inv_sqrt_psd(M, return_inverse=False):
    """Inverse square root of a symmetric positive definite matrix.

    Computed from the symmetric eigendecomposition ``M = V diag(w) V^T`` as
    ``V diag(w^{-1/2}) V^T``.  Eigenvalues below ``1e-12 * max(w)`` are an
    error rather than being clamped.

    If ``return_inverse`` is true the square root ``M^{1/2}`` (the inverse of
    the returned matrix) is returned as well, from the same factorization.
    """
    M = check_square(M)
    w, V = np.linalg.eigh(M)
    top = w[-1]
    if not top > 0 or w[0] < EIGEN_FLOOR * top:
        raise NotPositiveDefinite(
            f"eigenvalues [{w[0]:.3e}, {top:.3e}] violate the floor {EIGEN_FLOOR:g} * max"
        )
    root = np.sqrt(w)
    P = (V / root) @ V.T
    P = 0.5 * (P + P.T)
    if not return_inverse:
        return P
    P_inv = (V * root) @ V.T
    return P, 0.5 * (P_inv + P_inv.T)


def dikin_contains(hess_at_x, x, z):
    """True iff ``z`` lies in the Dikin ellipsoid of ``hess_at_x`` around ``x``."""
    dz = np.asarray(z, dtype=float) - np.asarray(x, dtype=float)
    return bool(dz @ hess_at_x @ dz <= 1.0 + DIKIN_SLACK)


def damped_newton(direction, x0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Minimize a self-concordant function by damped Newton.

    ``direction(x)`` returns the Newton step ``H^{-1} g`` and the decrement
    at ``x`` (see ``newton_step``).  The step length is 1 once the decrement
    is at most 1/4 and ``1 / (1 + decrement)`` before that, which keeps every
    iterate inside the domain.

    Returns ``(x, decrement, iterations)``.
    """
    x = np.array(x0, dtype=float)
    for it in range(max_iter + 1):
        step, lam = direction(x)
        if lam <= tol:
            return x, lam, it
        if it == max_iter:
            break
        x = x - (1.0 if lam <= 0.25 else 1.0 / (1.0 + lam)) * step
    raise NoConvergence(f"damped Newton stopped at decrement {lam:.3e} after {max_iter} steps")


# ---------------------------------------------------------------------------
# Convex bodies
# ---------------------------------------------------------------------------

class Ball:
    """Closed Euclidean ball ``{u : |u - center| <= radius}``."""

    kind = "ball"

    def __init__(self, center, radius=1.0):
        self.center = check_vector(center, name="center")
        self.radius = check_positive(float(radius), "radius")
        self.dim = self.center.shape[0]
        self.center.setflags(write=False)

    @classmethod
    def unit(cls, d):
        return cls(np.zeros(d), 1.0)

    @property
    def interior_point(self):
        return self.center

    @property
    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def contains(self, z, tol=MEMBERSHIP_TOL):
        dz = np.asarray(z, dtype=float) - self.center
        return bool(math.sqrt(float(dz @ dz)) <= self.radius * (1.0 + tol))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        dz = x - self.center
        norm = math.sqrt(float(dz @ dz))
        if norm <= self.radius:
            return x.copy()
        return self.center + dz * (self.radius / norm)

    def scaled(self, factor):
        """The ball shrunk (or grown) about its center by ``factor``."""
        return Ball(self.center, self.radius * factor)

    def sample_interior(self, n, rng, shrink=1.0):
        """``n`` points uniform in the ball shrunk by ``shrink`` about its center."""
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * shrink * rng.random(n) ** (1.0 / self.dim)
        return self.center + g * r[:, None]

    def barrier(self):
        return BallBarrier(self)

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Polytope:
    """Bounded polytope ``{u : A u >= b}`` with nonempty interior.

    Construction certifies the interior by computing the Chebyshev center
    (largest inscribed ball) and certifies boundedness by solving one LP per
    coordinate direction.
    """

    kind = "polytope"

    def __init__(self, A, b):
        A = check_points(A, name="A")
        b = check_vector(b, A.shape[0], name="b")
        self.A = A
        self.b = b
        self.A.setflags(write=False)
        self.b.setflags(write=False)
        self.dim = A.shape[1]
        self.n_rows = A.shape[0]
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ValueError("polytope rows must have nonzero normals")
        self._row_norms = norms
        self.interior_point, self.inradius = self._chebyshev_center()
        self.bounding_box = self._bounding_box()

    @classmethod
    def box(cls, lo, hi):
        lo = check_vector(lo, name="lo")
        hi = check_vector(hi, lo.shape[0], name="hi")
        if np.any(hi <= lo):
            raise ValueError("box requires hi > lo in every coordinate")
        d = lo.shape[0]
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([lo, -hi]))

    @classmethod
    def simplex(cls, d):
        """The standard simplex ``{u >= 0, sum(u) <= 1}``."""
        A = np.vstack([np.eye(d), -np.ones((1, d))])
        return cls(A, np.concatenate([np.zeros(d), [-1.0]]))

    def _chebyshev_center(self):
        d = self.dim
        # maximize t  s.t.  <a_j, u> - |a_j| t >= b_j,  0 <= t <= 1
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-self.A, self._row_norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=-self.b,
                      bounds=[(None, None)] * d + [(0.0, 1.0)], method="highs")
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise ValueError("polytope has an empty interior")
        return res.x[:d], float(res.x[-1])

    def _bounding_box(self):
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            for sign, out in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(self.dim)
                c[i] = sign
                res = linprog(c, A_ub=-self.A, b_ub=-self.b,
                              bounds=[(None, None)] * self.dim, method="highs")
                if res.status != 0:
                    raise ValueError("polytope must be bounded")
                out[i] = res.x[i]
        return lo, hi

    def slacks(self, z):
        return self.A @ np.asarray(z, dtype=float) - self.b

    def contains(self, z, tol=MEMBERSHIP_TOL):
        return bool(np.all(self.slacks(z) >= -tol * self._row_norms * (1.0 + np.abs(self.b))))

    def is_box(self):
        d = self.dim
        eye = np.eye(d)
        return self.n_rows == 2 * d and np.array_equal(self.A, np.vstack([eye, -eye]))

    def project(self, x):
        """Euclidean projection onto the polytope."""
        x = np.asarray(x, dtype=float)
        if self.contains(x, tol=0.0):
            return x.copy()
        if self.is_box():
            d = self.dim
            return np.clip(x, self.b[:d], -self.b[d:])
        return _project_polytope(self, x)

    def scaled(self, factor):
        """The polytope shrunk (or grown) about its Chebyshev center."""
        c = self.interior_point
        return Polytope(self.A, self.A @ c + factor * (self.b - self.A @ c))

    def sample_interior(self, n, rng, shrink=1.0):
        """``n`` points uniform in the (shrunk) polytope, by rejection from its box."""
        body = self if shrink == 1.0 else self.scaled(shrink)
        lo, hi = body.bounding_box
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            cand = lo + (hi - lo) * rng.random((max(64, 2 * n), self.dim))
            keep = np.all(cand @ body.A.T - body.b > 0, axis=1)
            out = np.vstack([out, cand[keep]])
        return out[:n]

    def barrier(self):
        return PolytopeBarrier(self)

    def to_dict(self):
        return {"kind": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}

    def __repr__(self):
        return f"Polytope(rows={self.n_rows}, dim={self.dim})"


def _project_polytope(body, x):
    from scipy.optimize import minimize

    cons = {"type": "ineq", "fun": lambda u: body.A @ u - body.b, "jac": lambda u: body.A}
    res = minimize(lambda u: 0.5 * float((u - x) @ (u - x)), body.interior_point,
                   jac=lambda u: u - x, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 500})
    if not res.success:
        raise NoConvergence(f"polytope projection failed: {res.message}")
    return res.x


# ---------------------------------------------------------------------------
# Barriers
# ---------------------------------------------------------------------------

class Barrier:
    """A mu-self-concordant barrier over ``body``.

    Subclasses implement ``_raw_value``, ``grad_hess`` and ``slacks``.
    """

    mu = None

    def __init__(self, body):
        self.body = body
        self.dim = body.dim

    def is_interior(self, x):
        return bool(np.all(self.slacks(x) > 0))

    def _check(self, x):
        s = self.slacks(x)
        if not np.all(s > 0):
            raise NotInterior(f"point {np.asarray(x).tolist()} is not strictly interior")
        return s

    @functools.cached_property
    def center(self):
        """Analytic center (minimizer of the barrier), computed once."""
        return analytic_center(self)

    @functools.cached_property
    def _raw_min(self):
        return self._raw_value(self.center)

    def value(self, x):
        return self._raw_value(x) - self._raw_min

    def gradient(self, x):
        return self.grad_hess(x)[0]

    def hessian(self, x):
        return self.grad_hess(x)[1]

    def shifted_inv_sqrt(self, x, shift):
        """``(hess(x) + shift * I)^{-1/2}`` and its inverse."""
        H = self.hessian(x)
        return inv_sqrt_psd(H + shift * np.eye(self.dim), return_inverse=True)

    def newton_direction(self, x, lin=None, shift=0.0):
        """Newton step and decrement of ``R(u) + <lin, u> + shift/2 |u|^2`` at ``x``."""
        g, H = self.grad_hess(x)
        if lin is not None:
            g = g + lin
        if shift:
            g = g + shift * np.asarray(x, dtype=float)
            H.flat[:: self.dim + 1] += shift
        return newton_step(g, H)


class BallBarrier(Barrier):
    """``-log(r^2 - |u - c|^2)``; self-concordance parameter 2."""

    mu = 2.0

    def __init__(self, body):
        super().__init__(body)
        self._c = body.center
        self._r2 = body.radius ** 2

    def slacks(self, x):
        w = np.asarray(x, dtype=float) - self._c
        return np.array([self._r2 - float(w @ w)])

    def _raw_value(self, x):
        s = self._check(x)[0]
        return -math.log(s)

    def grad_hess(self, x):
        w = np.asarray(x, dtype=float) - self._c
        s = self._r2 - float(w @ w)
        if not s > 0:
            raise NotInterior(f"point {np.asarray(x).tolist()} is not strictly interior")
        g = (2.0 / s) * w
        H = (4.0 / (s * s)) * w[:, None] * w
        H.flat[:: self.dim + 1] += 2.0 / s
        return g, H

    def newton_direction(self, x, lin=None, shift=0.0):
        # Sherman-Morrison on (a I + b w w^T) with a = 2/s + shift, b = 4/s^2
        x = np.asarray(x, dtype=float)
        w = x - self._c
        n2 = float(w @ w)
        s = self._r2 - n2
        if not s > 0:
            raise NotInterior(f"point {x.tolist()} is not strictly interior")
        g = (2.0 / s) * w
        if lin is not None:
            g = g + lin
        if shift:
            g = g + shift * x
        a = 2.0 / s + shift
        b = 4.0 / (s * s)
        step = (g - (b * float(w @ g) / (a + b * n2)) * w) / a
        lam2 = float(g @ step)
        return step, math.sqrt(lam2 if lam2 > 0.0 else 0.0)

    def shifted_inv_sqrt(self, x, shift):
        # hess + shift I = a I + b w w^T: eigenvalue a + b|w|^2 along w, a elsewhere
        w = np.asarray(x, dtype=float) - self._c
        n2 = float(w @ w)
        s = self._r2 - n2
        if not s > 0:
            raise NotInterior(f"point {np.asarray(x).tolist()} is not strictly interior")
        a = 2.0 / s + shift
        top = a + 4.0 * n2 / (s * s)
        if not a > 0 or a < EIGEN_FLOOR * top:
            raise NotPositiveDefinite(f"eigenvalue {a:.3e} below floor")
        eye = np.eye(self.dim)
        if n2 == 0.0:
            return eye / math.sqrt(a), eye * math.sqrt(a)
        proj = np.outer(w, w) / n2
        ra, rt = math.sqrt(a), math.sqrt(top)
        P = eye / ra + (1.0 / rt - 1.0 / ra) * proj
        P_inv = eye * ra + (rt - ra) * proj
        return P, P_inv


class PolytopeBarrier(Barrier):
    """``-sum_j log(<a_j, u> - b_j)``; self-concordance parameter m (row count)."""

    def __init__(self, body):
        super().__init__(body)
        self._A = body.A
        self._b = body.b
        self.mu = float(body.n_rows)

    def slacks(self, x):
        return self._A @ np.asarray(x, dtype=float) - self._b

    def _raw_value(self, x):
        s = self._check(x)
        return -float(np.sum(np.log(s)))

    def grad_hess(self, x):
        s = self._check(x)
        inv = 1.0 / s
        g = -(self._A.T @ inv)
        As = self._A * inv[:, None]
        return g, As.T @ As


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------

def barrier_value(bar, x):
    """Normalized barrier value (0 at the analytic center)."""
    return bar.value(x)


def barrier_gradient(bar, x):
    return bar.gradient(x)


def barrier_hessian(bar, x):
    return bar.hessian(x)


def analytic_center(bar, tol=NEWTON_TOL):
    """Minimizer of the barrier over the interior, by damped Newton."""
    x, _, _ = damped_newton(bar.newton_direction, bar.body.interior_point, tol=tol)
    return x


def make_body(spec):
    """Build a body from a config mapping (``kind`` = ball | box | simplex | polytope)."""
    kind = spec.get("kind")
    if kind == "ball":
        center = spec["center"] if "center" in spec else np.zeros(int(spec["d"]))
        return Ball(center, spec.get("radius", 1.0))
    if kind == "box":
        return Polytope.box(spec["lo"], spec["hi"])
    if kind == "simplex":
        return Polytope.simplex(int(spec["d"]))
    if kind == "polytope":
        return Polytope(spec["A"], spec["b"])
    raise ValueError(f"unknown body kind {kind!r}")
