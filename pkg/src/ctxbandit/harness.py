"""Experiment assembly, multi-seed runs and rate sweeps.

An experiment is described by a TOML document::

    spec_version = 1
    T = 4096
    seeds = 20                 # a count (seeds 0..n-1) or an explicit list

    [body]                     # ball {center | d, radius}, box {lo, hi}, simplex {d}, polytope {A, b}
    [loss]                     # quadratic | lower_bound | lower_bound_gamma0
    [context]                  # fixed {values} | iid_uniform {p} | pk {p, K}
    [noise]                    # zero | gaussian {sigma} | bounded_uniform {half_width}
    [algorithm]                # bco | router_bco | router_eps_net_ucb, K, preset, ...
    [output]                   # dir, transcript, timing
    [tolerances]               # membership

Every seed gets its own stream tree: contexts on ``"context"``, algorithm
draws on ``"alg"`` (cell ``i`` of a router on ``"alg"/"cell:i"``) and noise
on ``"noise"/"cell:i"`` for the cell that owns the round.  A bare ``bco``
run uses cell 0, so a one-cell router reproduces it exactly.
"""

import copy
import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .baselines import EpsNetUCB
from .bco import BarrierBCO
from .conversion import ContextualRouter, ConversionParams, Partition, choose_K, warn_if_short_horizon
from .environments import LowerBoundFamily, make_context_process, make_loss, sample_context
from .exceptions import BanditError, CertificationFailed, ConfigError, InvariantViolation
from .geometry import MEMBERSHIP_TOL, Ball, make_body
from .randomness import SeedStream, make_noise
from .regret import RatePoints, RegretLedger, rate_fit

SPEC_VERSION = 1
WORKERS_ENV = "CTXBANDIT_MAX_WORKERS"
ALGORITHMS = ("bco", "router_bco", "router_eps_net_ucb")
_TABLES = ("body", "loss", "context", "noise", "algorithm", "output", "tolerances")


@dataclass(frozen=True)
class ExperimentConfig:
    body: dict
    loss: dict
    context: dict
    algorithm: dict
    T: int
    seeds: tuple
    noise: dict = field(default_factory=lambda: {"kind": "zero"})
    output: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    spec_version: int = SPEC_VERSION

    @classmethod
    def from_dict(cls, doc):
        doc = copy.deepcopy(dict(doc))
        version = doc.pop("spec_version", None)
        if version != SPEC_VERSION:
            raise ConfigError(f"spec_version must be {SPEC_VERSION}, got {version!r}")
        unknown = set(doc) - set(_TABLES) - {"T", "seeds"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        for key in ("body", "loss", "context", "algorithm"):
            if not isinstance(doc.get(key), dict):
                raise ConfigError(f"missing [{key}] table")
        T = doc.get("T")
        if not isinstance(T, int) or isinstance(T, bool) or T < 1:
            raise ConfigError(f"T must be a positive integer, got {T!r}")
        seeds = doc.get("seeds", 1)
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            if seeds < 1:
                raise ConfigError("seeds must be >= 1")
            seeds = tuple(range(seeds))
        elif isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds):
            seeds = tuple(seeds)
        else:
            raise ConfigError(f"seeds must be a positive count or a nonempty list of integers, got {seeds!r}")
        if doc["algorithm"].get("kind") not in ALGORITHMS:
            raise ConfigError(f"algorithm.kind must be one of {ALGORITHMS}")
        return cls(body=doc["body"], loss=doc["loss"], context=doc["context"],
                   algorithm=doc["algorithm"], T=T, seeds=seeds,
                   noise=doc.get("noise", {"kind": "zero"}), output=doc.get("output", {}),
                   tolerances=doc.get("tolerances", {}))

    @classmethod
    def from_toml(cls, path):
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_algorithm(self, **changes):
        return self.replace(algorithm={**self.algorithm, **changes})

    def to_dict(self):
        out = {"spec_version": self.spec_version, "T": self.T, "seeds": list(self.seeds)}
        for key in _TABLES:
            out[key] = copy.deepcopy(getattr(self, key))
        return out


@dataclass
class Environment:
    """Everything a seed needs, built from a config."""

    body: object
    model: object
    contexts: object
    noise: object
    algorithm: object
    K: int
    p: int
    d: int


def _context_dim(cfg):
    ctx = cfg.context
    if "p" in ctx:
        return int(ctx["p"])
    if ctx.get("kind") == "fixed":
        return int(np.atleast_2d(np.asarray(ctx["values"], dtype=float)).shape[1])
    loss_A = cfg.loss.get("A")
    if loss_A is not None:
        return int(np.atleast_2d(np.asarray(loss_A, dtype=float)).shape[1])
    return 1


def conversion_params(alg, model, barrier):
    """Consistency exponents for K tuning; defaults to the strongly convex preset."""
    k = model.constants
    preset = alg.get("preset", "strongly_convex")
    if preset == "strongly_convex":
        T0 = alg.get("T0", 16.0 * (barrier.mu + k.beta / k.alpha) ** 2)
        return ConversionParams.strongly_convex(alg.get("rho", 0.0), k.L, k.gamma, T0)
    if preset == "explicit":
        return ConversionParams(alg["tau1"], alg["tau2"], alg["tau3"], alg.get("T0", 1.0), k.L, k.gamma)
    raise ConfigError(f"unknown conversion preset {preset!r}")


def build_environment(cfg):
    """Assemble body, loss, context process, noise and the (unstarted) algorithm."""
    try:
        body = make_body(cfg.body)
        p = _context_dim(cfg)
        model = make_loss(cfg.loss, body, p, cfg.T)
        if isinstance(model, LowerBoundFamily) and not (
                isinstance(body, Ball) and body.radius == 1.0 and not np.any(body.center)):
            raise ConfigError("the lower-bound family lives on the unit ball centered at the origin")
        if model.p != p:
            raise ConfigError(f"loss expects contexts of dimension {model.p}, context table gives {p}")
        ctx_spec = dict(cfg.context)
        if ctx_spec.get("kind") == "pk" and ctx_spec.get("K", "auto") == "auto":
            if not isinstance(model, LowerBoundFamily):
                raise ConfigError("context K = 'auto' needs a lower-bound loss to match")
            ctx_spec["K"] = model.K
        contexts = make_context_process(ctx_spec, p)
        noise = make_noise(cfg.noise)
        alg = cfg.algorithm
        kind = alg["kind"]
        barrier = body.barrier()
        k = model.constants
        if kind == "router_eps_net_ucb":
            base = EpsNetUCB(body, eps=alg.get("eps", 0.25))
        else:
            base = BarrierBCO(barrier, alpha=alg.get("alpha", k.alpha), beta=alg.get("beta", k.beta),
                              M=alg.get("M", k.M), sigma=noise.sub_gaussian_proxy, horizon=cfg.T)
        if kind == "bco":
            K = 1
            algorithm = base
        else:
            K = alg.get("K", "auto")
            if K == "auto":
                if isinstance(model, LowerBoundFamily):
                    K = model.K
                else:
                    K = choose_K(conversion_params(alg, model, barrier), body.dim, p, cfg.T)
            elif not isinstance(K, int) or K < 1:
                raise ConfigError(f"algorithm.K must be 'auto' or a positive integer, got {K!r}")
            if kind == "router_bco" and k.gamma > 0:
                warn_if_short_horizon(K, p, cfg.T, conversion_params(alg, model, barrier).T0)
            algorithm = ContextualRouter(base, K=K, p=p)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc!r}") from exc
    return Environment(body, model, contexts, noise, algorithm, int(K), p, body.dim)


def git_blob_sha1(data):
    """Content hash as ``git hash-object`` computes it for a blob."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass(frozen=True)
class SeedResult:
    seed: int
    final_regret: float
    transcript_sha1: str
    n_instances: int
    csv: str


def run_seed(cfg, seed, env=None):
    """Play T rounds for one seed and return its ledger-backed result."""
    env = build_environment(cfg) if env is None else env
    root = SeedStream(seed)
    ctx_rng = root.child("context").generator()
    alg = env.algorithm
    router = isinstance(alg, ContextualRouter)
    if router:
        alg.random_state = root.child("alg")
    else:
        alg.random_state = root.child("alg", "cell:0")
    alg.reset()
    partition = alg.partition_ if router else Partition(env.p, 1)
    noise_rngs = {}
    tol = float(cfg.tolerances.get("membership", MEMBERSHIP_TOL))
    ledger = RegretLedger()
    for t in range(cfg.T):
        c = sample_context(env.contexts, partition, t, ctx_rng)
        z = alg.propose(c)
        if not env.body.contains(z, tol=tol):
            raise InvariantViolation(f"round {t + 1}: query {z.tolist()} is outside the body")
        cell = alg.pending_cell_ if router else 0
        rng = noise_rngs.get(cell)
        if rng is None:
            rng = noise_rngs[cell] = root.child("noise", f"cell:{cell}").generator()
        f_value, f_star = env.model.round_values(z, c)
        y = f_value + env.noise.draw(rng)
        alg.feed(y)
        ledger.append(c, z, y, f_value, f_star)
    if router and sum(alg.counts_.values()) != cfg.T:
        raise InvariantViolation("per-cell visit counts do not add up to T")
    text = ledger.to_csv()
    return SeedResult(int(seed), ledger.cum_regret, git_blob_sha1(text),
                      alg.n_instances_ if router else 1, text)


def _run_seed_task(args):
    cfg, seed = args
    try:
        return run_seed(cfg, seed)
    except BanditError as exc:
        raise _with_seed(exc, seed) from exc


def _with_seed(exc, seed):
    try:
        new = type(exc)(f"seed {seed}: {exc}")
    except TypeError:
        return exc
    if isinstance(exc, CertificationFailed):
        new.witness = exc.witness
    return new


def max_workers(requested=None):
    """Worker cap: ``CTXBANDIT_MAX_WORKERS`` overrides the requested value."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        return max(1, value)
    return max(1, int(requested or 1))


@dataclass(frozen=True)
class RunSummary:
    T: int
    seeds: tuple
    final_regrets: tuple
    transcript_sha1: tuple
    K: int
    d: int
    p: int
    algorithm: str
    config: dict
    wall_clock: float = None
    transcripts: tuple = ()

    @property
    def mean_regret(self):
        return float(np.mean(self.final_regrets))

    @property
    def sd_regret(self):
        if len(self.final_regrets) < 2:
            return 0.0
        return float(np.std(self.final_regrets, ddof=1))

    def to_dict(self, timing=False):
        out = {"T": self.T, "seeds": list(self.seeds), "mean_regret": self.mean_regret,
               "sd_regret": self.sd_regret, "K": self.K, "d": self.d, "p": self.p,
               "algorithm": self.algorithm, "final_regrets": list(self.final_regrets),
               "transcript_sha1": list(self.transcript_sha1), "config": self.config}
        if timing:
            out["wall_clock"] = self.wall_clock
        return out

    def to_json(self, timing=False):
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"


def run_experiment(cfg, seeds=None, workers=None, out_dir=None, transcript=None):
    """Run every seed of ``cfg`` and aggregate; writes files when an output dir is set."""
    seeds = tuple(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("no seeds to run")
    env = build_environment(cfg)
    start = time.perf_counter()
    n_workers = min(max_workers(workers), len(seeds))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_seed_task, [(cfg, s) for s in seeds]))
    else:
        results = []
        for s in seeds:
            try:
                results.append(run_seed(cfg, s, env))
            except BanditError as exc:
                raise _with_seed(exc, s) from exc
    elapsed = time.perf_counter() - start
    results.sort(key=lambda r: r.seed)
    summary = RunSummary(cfg.T, tuple(r.seed for r in results), tuple(r.final_regret for r in results),
                         tuple(r.transcript_sha1 for r in results), env.K, env.d, env.p,
                         cfg.algorithm["kind"], cfg.to_dict(), elapsed,
                         tuple(r.csv for r in results))
    out_dir = cfg.output.get("dir") if out_dir is None else out_dir
    if out_dir is not None:
        write_outputs(summary, out_dir, cfg.output.get("transcript", False) if transcript is None else transcript,
                      timing=cfg.output.get("timing", False))
    return summary


def write_outputs(summary, out_dir, transcript=False, timing=False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary.to_json(timing))
    if transcript:
        for seed, text in zip(summary.seeds, summary.transcripts):
            (out / f"transcript_seed{seed}.csv").write_text(text)


@dataclass(frozen=True)
class SweepReport:
    points: RatePoints
    slope: float
    intercept: float
    residual: float
    summaries: tuple

    def to_dict(self):
        return {"T": list(self.points.T), "mean_regret": list(self.points.R), "slope": self.slope,
                "intercept": self.intercept, "max_residual": self.residual,
                "K": [s.K for s in self.summaries],
                "sd_regret": [s.sd_regret for s in self.summaries]}


def sweep_rates(cfg, horizons, run=run_experiment, **run_kwargs):
    """Run ``cfg`` at each horizon (K and q_T re-tuned) and fit the log-log slope."""
    horizons = [int(T) for T in horizons]
    if len(horizons) < 3:
        raise ConfigError("a sweep needs at least 3 horizons")
    summaries = tuple(run(cfg.replace(T=T), **run_kwargs) for T in horizons)
    points = RatePoints(tuple(horizons), tuple(s.mean_regret for s in summaries))
    slope, intercept, resid = rate_fit(points)
    return SweepReport(points, slope, intercept, resid, summaries)


def parse_horizons(text):
    """``"2^10..2^16"`` (powers of two) or a comma-separated list of integers."""
    text = text.strip()
    if ".." in text:
        lo, hi = (part.strip() for part in text.split("..", 1))
        try:
            if lo.startswith("2^") and hi.startswith("2^"):
                return [2 ** k for k in range(int(lo[2:]), int(hi[2:]) + 1)]
            a, b = int(lo), int(hi)
        except ValueError as exc:
            raise ConfigError(f"cannot parse horizons {text!r}") from exc
        out, T = [], a
        while T <= b:
            out.append(T)
            T *= 2
        return out
    try:
        return [int(eval_power(part)) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse horizons {text!r}") from exc


def eval_power(token):
    token = token.strip()
    if "^" in token:
        base, exp = token.split("^", 1)
        return int(base) ** int(exp)
    return int(token)


def certify(cfg, n_pairs=10_000, seed=0):
    """Sampled certification of the configured loss model."""
    from .environments import certify_constants

    env = build_environment(cfg)
    return certify_constants(env.model, n_pairs, SeedStream(seed).child("certify").generator())


def fit_csv(path):
    """Rate fit of a two-column CSV ``T, regret`` (header required)."""
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} has no data rows")
    keys = list(rows[0])
    t_key = next((k for k in keys if k.strip() in ("T", "t", "horizon")), None)
    r_key = next((k for k in keys if k.strip() in ("R", "regret", "mean_regret", "cum_regret")), None)
    if t_key is None or r_key is None:
        raise ConfigError(f"{path} needs a T column and a regret column, found {keys}")
    try:
        points = RatePoints(tuple(float(r[t_key]) for r in rows), tuple(float(r[r_key]) for r in rows))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return rate_fit(points)
