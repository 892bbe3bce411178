"""Command line entry point: ``ctxbandit run|sweep|certify|fit``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation
(including failed certification), 4 oracle or solver failure.
"""

import argparse
import json
import logging
import sys

from .exceptions import (CertificationFailed, ConfigError, DegenerateFit, InvariantViolation,
                         NoConvergence, OracleFailure)
from .harness import ExperimentConfig, certify, fit_csv, parse_horizons, run_experiment, sweep_rates

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_ORACLE = 4


def _load(args):
    cfg = ExperimentConfig.from_toml(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seeds=(args.seed,))
    elif getattr(args, "seeds", None) is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        cfg = cfg.replace(seeds=tuple(range(args.seeds)))
    return cfg


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_run(args):
    cfg = _load(args)
    transcript = True if args.transcript else None
    summary = run_experiment(cfg, workers=args.workers, out_dir=args.out, transcript=transcript)
    sys.stdout.write(summary.to_json(timing=args.timing))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    report = sweep_rates(cfg, parse_horizons(args.horizons), workers=args.workers)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_certify(args):
    cfg = _load(args)
    rep = certify(cfg, n_pairs=args.n_pairs, seed=args.seed or 0)
    _emit({"n_pairs": rep.n_pairs, "holder_ratio": rep.holder_ratio, "hess_min": float(rep.hess_min),
           "hess_max": float(rep.hess_max), "sup_abs": rep.sup_abs, "L": rep.constants.L,
           "alpha": rep.constants.alpha, "beta": rep.constants.beta, "M": rep.constants.M,
           "passed": True})
    return EXIT_OK


def cmd_fit(args):
    slope, intercept, resid = fit_csv(args.csv)
    _emit({"slope": slope, "intercept": intercept, "max_residual": resid})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ctxbandit", description="Contextual bandit experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    group = run.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int)
    group.add_argument("--seeds", type=int, help="run seeds 0..N-1")
    run.add_argument("--out", help="directory for summary.json and transcripts")
    run.add_argument("--transcript", action="store_true", help="write per-seed CSV transcripts")
    run.add_argument("--workers", type=int, help="parallel seeds (capped by CTXBANDIT_MAX_WORKERS)")
    run.add_argument("--timing", action="store_true", help="include wall-clock time in the summary")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="fit the regret growth rate over horizons")
    sweep.add_argument("config")
    sweep.add_argument("--horizons", required=True, help="e.g. 2^10..2^16 or 1024,2048,4096")
    sweep.add_argument("--seeds", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.set_defaults(func=cmd_sweep)

    cert = sub.add_parser("certify", help="check the declared loss constants on samples")
    cert.add_argument("config")
    cert.add_argument("--n-pairs", type=int, default=10_000)
    cert.add_argument("--seed", type=int, default=0)
    cert.set_defaults(func=cmd_certify)

    fit = sub.add_parser("fit", help="log-log slope of a T,regret CSV")
    fit.add_argument("csv")
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DegenerateFit) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationFailed as exc:
        print(f"certification failed: {exc}; witness={exc.witness}", file=sys.stderr)
        return EXIT_INVARIANT
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OracleFailure, NoConvergence) as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
