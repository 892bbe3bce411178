"""Regret bookkeeping, transcripts and log-log rate fits.

Regret is always computed from noiseless loss values; the observed values
``y_t`` are logged for the transcript only.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateFit, OracleFailure

INCREMENT_SLACK = 1e-9


@dataclass(frozen=True)
class RegretRecord:
    t: int
    c: np.ndarray
    z: np.ndarray
    y: float
    f_value: float
    f_star: float
    inst_regret: float
    cum_regret: float


@dataclass
class RegretLedger:
    """Per-round records and the running contextual regret."""

    records: list = field(default_factory=list)
    cum_regret: float = 0.0

    def __len__(self):
        return len(self.records)

    def append(self, c, z, y, f_value, f_star):
        inc = f_value - f_star
        if inc < -INCREMENT_SLACK:
            raise OracleFailure(
                f"round {len(self.records) + 1}: f(z)={f_value!r} is below the reported minimum {f_star!r}")
        self.cum_regret += inc
        rec = RegretRecord(len(self.records) + 1, np.asarray(c, dtype=float), np.asarray(z, dtype=float),
                           float(y), float(f_value), float(f_star), float(inc), self.cum_regret)
        self.records.append(rec)
        return rec

    @property
    def contexts(self):
        return np.array([r.c for r in self.records])

    @property
    def actions(self):
        return np.array([r.z for r in self.records])

    def header(self):
        if not self.records:
            raise ValueError("empty ledger")
        p, d = len(self.records[0].c), len(self.records[0].z)
        return (["t"] + [f"c{i}" for i in range(p)] + [f"z{i}" for i in range(d)]
                + ["y", "f_value", "f_star", "inst_regret", "cum_regret"])

    def rows(self):
        for r in self.records:
            yield ([str(r.t)] + [repr(float(v)) for v in r.c] + [repr(float(v)) for v in r.z]
                   + [repr(r.y), repr(r.f_value), repr(r.f_star), repr(r.inst_regret), repr(r.cum_regret)])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())
        return buf.getvalue()


def record_round(ledger, model, c, z, y, min_oracle=None):
    """Append round ``(c, z, y)``; regret uses the noiseless ``f(z, c)`` and the per-context minimum."""
    if min_oracle is None:
        f_value, f_star = model.round_values(z, c)
    else:
        f_value = model.value(z, c)
        f_star = min_oracle(model, c)[1]
    ledger.append(c, z, y, f_value, f_star)
    return ledger


def static_regret(trace, model, body=None):
    """``sum_t f(z_t, c_t) - min_z sum_t f(z, c_t)`` over a trace of ``(c_t, z_t)`` pairs.

    ``trace`` is a RegretLedger or a sequence of ``(c, z)`` pairs.
    """
    if isinstance(trace, RegretLedger):
        C, Z = trace.contexts, trace.actions
    else:
        pairs = list(trace)
        C = np.array([np.atleast_1d(np.asarray(c, dtype=float)) for c, _ in pairs])
        Z = np.array([np.asarray(z, dtype=float) for _, z in pairs])
    if len(C) == 0:
        raise ValueError("static regret of an empty trace")
    _, best = model.static_comparator(C)
    played = math.fsum(model.value(z, c) for c, z in zip(C, Z))
    return played - best


@dataclass(frozen=True)
class RatePoints:
    """Horizons and averaged regrets for a log-log fit."""

    T: tuple
    R: tuple

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if T.shape != R.shape or T.ndim != 1:
            raise ValueError("T and R must be 1-d of equal length")
        if len(T) < 3:
            raise ValueError("a rate fit needs at least 3 points")
        if np.any(R <= 0):
            raise ValueError("regrets must be positive for a log fit")
        if np.any(np.diff(T) < 0):
            raise ValueError("horizons must be increasing")


def rate_fit(points):
    """Least-squares fit of log R on log T: ``(slope, intercept, max |residual|)``."""
    T = np.asarray(points.T, dtype=float)
    R = np.asarray(points.R, dtype=float)
    if len(np.unique(T)) < 2:
        raise DegenerateFit("horizons are not distinct")
    if np.any(np.diff(T) == 0):
        raise DegenerateFit("repeated horizon")
    x, y = np.log(T), np.log(R)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))
