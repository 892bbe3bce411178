import numpy as np

from ctxbandit.geometry import Ball, Polytope


def central_gradient(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def central_jacobian(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def fd_relative_error(analytic, numeric):
    """Max-norm error scaled by max(1, |analytic|_inf)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric)) / max(1.0, np.max(np.abs(analytic))))


def bodies(d):
    return [Ball.unit(d), Ball(np.full(d, 0.5), 2.0), Polytope.box(-np.ones(d), np.ones(d)),
            Polytope.simplex(d)]
