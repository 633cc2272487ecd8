"""Command-line front end.

Exit codes: 0 success, 1 rejected input (flags, config, model mismatch),
2 runtime failure (budget exceeded, numerical failure, I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bounds import estimate_bound, regret_benchmark
from .dp import opt_dp
from .errors import BudgetExceededError, NumericalError, ValidationError
from .harness import ExperimentConfig, build_prior, export, run_experiment, write_curves
from .inner import PenaltyKind
from .policies import PolicyKind, decide
from .rng import RngStream

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", required=True, choices=["beta", "gaussian"])
    g.add_argument("--arms", type=int, required=True, help="number of arms K")
    g.add_argument("--alpha", type=float, nargs="+", help="Beta alpha (one value or K values)")
    g.add_argument("--beta", type=float, nargs="+", help="Beta beta (one value or K values)")
    g.add_argument("--mean", type=float, nargs="+", help="Gaussian prior mean")
    g.add_argument("--variance", type=float, nargs="+", help="Gaussian prior variance")
    g.add_argument("--noise-sd", type=float, nargs="+", help="Gaussian reward noise sd")


def _prior_from_args(args):
    model = {"family": args.model, "arms": args.arms}
    flags = {"alpha": args.alpha, "beta": args.beta, "mean": args.mean,
             "variance": args.variance, "noise_sd": args.noise_sd}
    for key, val in flags.items():
        if val is not None:
            model[key] = list(val)
    return build_prior(model)


def _build_parser() -> _Parser:
    parser = _Parser(prog="irsbandit", description="Information relaxation sampling for "
                     "finite-horizon Bayesian bandits.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run an experiment config and print the regret table")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the config sample count")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="write the table here instead of stdout")

    p = sub.add_parser("bound", help="Monte Carlo estimate of W^z(T, y)")
    _add_model_flags(p)
    p.add_argument("--penalty", required=True, choices=[z.value for z in PenaltyKind])
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--S", type=int, default=20000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("decide", help="one decision of a policy at a belief")
    _add_model_flags(p)
    p.add_argument("--policy", required=True, choices=[k.value for k in PolicyKind])
    p.add_argument("--T", type=int, required=True, help="remaining periods")
    p.add_argument("--t", type=int, default=1, help="current epoch (Bayes-UCB only)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("opt", help="Bayes-optimal value by backward induction (Beta arms)")
    _add_model_flags(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("curves", help="run a config and write one regret-curve CSV per row name")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the config sample count")
    p.add_argument("--jobs", type=int)
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config, {"seed": args.seed, "samples": args.samples})


def _cmd_simulate(args) -> None:
    config = _load_config(args)
    table = run_experiment(config, jobs=args.jobs)
    out = args.out
    text = export(table, args.format)
    _emit(text, out)
    for fmt in ("csv", "json"):
        path = config.output.get(fmt)
        if path and path != out:
            export(table, fmt, path)
    for f in table.failures:
        print(f"{f.status}: {f.kind} {f.name} T={f.T}: {f.message}", file=sys.stderr)


def _cmd_curves(args) -> None:
    config = _load_config(args)
    table = run_experiment(config, jobs=args.jobs)
    for path in write_curves(table, args.out_dir):
        print(path)


def _cmd_bound(args) -> None:
    prior = _prior_from_args(args)
    est = estimate_bound(args.penalty, args.T, prior, args.S, RngStream(args.seed))
    bench = regret_benchmark(args.T, prior)
    _emit(f"penalty={est.penalty.value} T={args.T} S={est.samples} "
          f"mean={est.mean:.6f} stderr={est.stderr:.6f} benchmark={bench:.6f}\n", args.out)


def _cmd_decide(args) -> None:
    prior = _prior_from_args(args)
    arm = decide(args.policy, args.T, prior, RngStream(args.seed).child("decide"), t=args.t)
    _emit(f"{arm}\n", args.out)


def _cmd_opt(args) -> None:
    prior = _prior_from_args(args)
    sol = opt_dp(args.T, prior)
    _emit(f"{sol.value:.6f}\n", args.out)


COMMANDS = {"simulate": _cmd_simulate, "bound": _cmd_bound, "decide": _cmd_decide,
            "opt": _cmd_opt, "curves": _cmd_curves}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BudgetExceededError, NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
