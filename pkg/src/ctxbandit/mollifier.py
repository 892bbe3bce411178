"""Smooth bump ``eta0`` and its running integral ``eta``.

``eta0`` equals 1 on ``|x| <= 1/4``, 0 on ``|x| >= 1`` and bridges the two
with the classical ``exp(-1/u)`` smooth step, so it is even and C-infinity.
``eta(x) = int_{-inf}^x eta0`` has no elementary form; it is read from a
table of cumulative integrals over the left bridge ``[-1, -1/4]`` plus a
fixed Gauss-Legendre rule on the last partial sub-interval.  Everything else
follows from linearity on the plateau and the evenness of ``eta0``.
"""

import functools

import numpy as np
from scipy import integrate, optimize

INNER = 0.25
OUTER = 1.0
_WIDTH = OUTER - INNER
_N_CELLS = 512
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def eta0(x):
    """The bump: 1 on [-1/4, 1/4], 0 outside (-1, 1), strictly between otherwise."""
    x = np.asarray(x, dtype=float)
    s = np.clip((np.abs(x) - INNER) / _WIDTH, 0.0, 1.0)
    # exp(-1/u) with u = 0 mapped to exp(-inf) = 0; a + b never vanishes
    with np.errstate(divide="ignore"):
        a = np.exp(-1.0 / (1.0 - s))
        b = np.exp(-1.0 / s)
    out = a / (a + b)
    return out if out.ndim else float(out)


def eta0_prime(x):
    """Derivative of ``eta0`` (equivalently the second derivative of ``eta``)."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.zeros_like(ax)
    mid = (ax > INNER) & (ax < OUTER)
    s = (ax[mid] - INNER) / _WIDTH
    # d/ds [A/(A+B)] = -AB (1/(1-s)^2 + 1/s^2) / (A+B)^2, with AB/(A+B)^2 = 1/(r + 2 + 1/r)
    log_r = -1.0 / (1.0 - s) + 1.0 / s  # log(A/B)
    ratio = np.exp(-np.abs(log_r))
    frac = ratio / (1.0 + ratio) ** 2
    ds = -frac * (1.0 / (1.0 - s) ** 2 + 1.0 / s ** 2)
    out[mid] = np.sign(x[mid]) * ds / _WIDTH
    return out if out.ndim else float(out)


@functools.lru_cache(maxsize=None)
def _table():
    edges = np.linspace(-OUTER, -INNER, _N_CELLS + 1)
    pieces = [integrate.quad(eta0, lo, hi, epsabs=1e-15, epsrel=1e-14)[0]
              for lo, hi in zip(edges[:-1], edges[1:])]
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    return edges, cum


def _left_integral(x):
    """``int_{-1}^x eta0`` for x in [-1, -1/4]."""
    edges, cum = _table()
    k = np.clip(((x + OUTER) / _WIDTH * _N_CELLS).astype(int), 0, _N_CELLS - 1)
    lo = edges[k]
    half = 0.5 * (x - lo)
    nodes = lo[:, None] + half[:, None] * (_GL_NODES + 1.0)
    partial = half * (eta0(nodes) @ _GL_WEIGHTS)
    return cum[k] + partial


@functools.lru_cache(maxsize=None)
def eta_bridge_mass():
    """``int_{-1}^{-1/4} eta0``."""
    return float(_table()[1][-1])


def eta_total():
    """``eta(+inf) = int eta0``; also equals ``eta(1)``."""
    return 2.0 * eta_bridge_mass() + 2.0 * INNER


def eta(x):
    """Running integral of ``eta0``: 0 for x <= -1, non-decreasing, constant for x >= 1."""
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    mass = eta_bridge_mass()
    total = eta_total()
    # linear on the plateau, constant outside the support; bridges patched below
    out = np.where(flat >= OUTER, total, np.where(flat <= -OUTER, 0.0, mass + flat + INNER))
    lb = (flat > -OUTER) & (flat < -INNER)
    if lb.any():
        out[lb] = _left_integral(flat[lb])
    rb = (flat > INNER) & (flat < OUTER)
    if rb.any():
        out[rb] = total - _left_integral(-flat[rb])
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


@functools.lru_cache(maxsize=None)
def eta_second_derivative_bound():
    """``max |eta''| = max |eta0'|`` over the real line."""
    grid = np.linspace(INNER, OUTER, 4001)[1:-1]
    vals = np.abs(eta0_prime(grid))
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda u: -abs(eta0_prime(u)), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-12})
    return float(max(vals[k], -res.fun))


# public names mirroring the operation names used elsewhere
mollifier_eta0 = eta0
mollifier_eta = eta
