"""Command line interface: ``proxsga run | estimate-sigma | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .data import DatasetFormatError, load_dataset
from .harness import ExperimentConfig, plan, run_repeated, sigma_seed
from .losses import ErmObjective
from .optimizers import DivergenceError, estimate_sigma
from .regularizers import LogSumRegularizer
from .verification import SUITES, run_suite


def _sigma_arg(text: str):
    if text == "estimate":
        return "estimate"
    val = float(text)
    if val < 0:
        raise argparse.ArgumentTypeError("sigma must be >= 0")
    return val


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    # every default is None so that --config values survive unless overridden
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--data", help="dataset path")
    p.add_argument("--format", choices=("libsvm", "idx"))
    p.add_argument("--labels", help="IDX label file (default: inferred from --data)")
    p.add_argument("--dim", type=int, help="feature dimension override")
    p.add_argument("--positive-class", type=int, dest="positive_class")
    p.add_argument("--algo", choices=("mbsga", "vrsga"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--kappa", type=float, help="default 1/d")
    p.add_argument("--nu", type=float)
    p.add_argument("--passes", type=float, help="effective passes over the data")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-rule", choices=("random_R", "last_iterate"), dest="output_rule")
    p.add_argument("--sigma", type=_sigma_arg, help="noise level or 'estimate'")
    p.add_argument("--out", help="trace output path")
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--grad-every", type=int, dest="grad_every",
                   help="record ||grad E|| on every j-th record (0 = never)")
    p.add_argument("--repeat", type=int, help="run k consecutive seeds in parallel")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    if cfg.sigma == "estimate":
        cfg.sigma = None
    return cfg.validate()


def cmd_run(args) -> int:
    run_repeated(build_config(args), sys.stdout)
    return 0


def cmd_estimate_sigma(args) -> int:
    cfg = build_config(args)
    cfg.algo = "mbsga"
    ds = load_dataset(cfg.data, cfg.format, d=cfg.dim,
                      positive_class=cfg.positive_class, label_path=cfg.labels)
    obj = ErmObjective(ds)
    kappa = 1.0 / obj.d if cfg.kappa is None else cfg.kappa
    g = LogSumRegularizer(kappa, cfg.nu, obj.d)
    pl = plan(cfg, obj)
    sigma, series = estimate_sigma(obj, g, pl["N"], pl["alpha"], pl["theta"],
                                   trial_iters=args.trial_iters, seed=sigma_seed(cfg.seed))
    print(f"N = {pl['N']}")
    for k, s in enumerate(series, start=1):
        print(f"sigma_{k} = {s!r}")
    print(f"sigma_hat = {sigma!r}")
    return 0


def cmd_verify(args) -> int:
    names = args.suites or list(SUITES)
    reports = [run_suite(name) for name in names]
    json.dump({"passed": all(r.passed for r in reports),
               "suites": [r.to_dict() for r in reports]}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if all(r.passed for r in reports) else 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxsga",
        description="Stochastic gradient methods for non-convex regularized ERM.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment and write a trace")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("estimate-sigma", help="estimate the gradient noise level")
    _add_experiment_flags(p)
    p.add_argument("--trial-iters", type=int, default=50, dest="trial_iters")
    p.set_defaults(func=cmd_estimate_sigma)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suites", nargs="*", metavar="SUITE",
                   help=f"one of {', '.join(SUITES)} (default: all)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError, DatasetFormatError, DivergenceError) as exc:
        print(f"proxsga: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
