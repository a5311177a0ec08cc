"""Command-line entry point.

Subcommands: ``simulate`` (repeated paired trials of one experiment),
``scaling`` (error-vs-dimension study), ``verify`` (diagnostics bundle),
``plot-data`` (re-emit plot CSVs from a stored aggregate).  Options come
from an optional JSON config file, overridden by flags; the environment
variable ``NOISEREG_SEED`` overrides the seed last.

Exit codes: 0 success, 1 invalid configuration, 2 every trial diverged,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .harness import (
    AggregateResult,
    AllTrialsDivergedError,
    ConfigError,
    ExperimentConfig,
    emit_plot_data,
    run_experiment,
    run_scaling_study,
    run_verify,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Exit code 1 (invalid config) instead of argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--d", type=int, help="problem dimension")
    p.add_argument("--sigma-sq", type=float, dest="sigma_sq", help="noise variance")
    p.add_argument("--trials", type=int, help="number of repeated trials")
    p.add_argument("--horizon", type=int, dest="horizon_t", help="iterations per run")
    p.add_argument("--seed", type=int, help="base seed (NOISEREG_SEED overrides)")
    p.add_argument("--algos", help="comma-separated subset of pgd,gd_small,gd_large")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale", default=None,
                   help="full-size campaign: d=30, T=1e8")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--workers", type=int, help="parallel trial workers")
    p.add_argument("--nu-sq-coeff", type=float, dest="nu_sq_coeff",
                   help="coefficient of sqrt(d sigma^2) in nu^2")
    p.add_argument("--eta-coeff", type=float, dest="eta_coeff",
                   help="coefficient of sigma^2/d^2 in the step size")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noisereg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run repeated paired trials")
    _add_common(sim)
    sim.add_argument("--experiment", choices=("rank1_psd", "rank3_psd", "rectangular"),
                     help="experiment kind (default rank1_psd)")

    sca = sub.add_parser("scaling", help="median error vs dimension")
    _add_common(sca)
    sca.add_argument("--d-list", dest="d_list", help="comma-separated dimensions (>= 3)")

    ver = sub.add_parser("verify", help="run the diagnostics bundle")
    _add_common(ver)

    plo = sub.add_parser("plot-data", help="emit plot CSVs from an aggregate.json")
    plo.add_argument("--aggregate", required=True, help="path to aggregate.json")
    plo.add_argument("--out", dest="output_dir", required=True, help="output directory")
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    payload: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        payload.update(loaded)

    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in vars(args).items():
        if key in known and value is not None:
            payload[key] = value
    if getattr(args, "algos", None):
        payload["algorithms"] = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    if getattr(args, "d_list", None):
        try:
            payload["d_list"] = tuple(int(v) for v in str(args.d_list).split(","))
        except ValueError:
            raise ConfigError(f"bad --d-list value {args.d_list!r}") from None

    env_seed = os.environ.get("NOISEREG_SEED")
    if env_seed is not None:
        try:
            payload["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"NOISEREG_SEED must be an integer, got {env_seed!r}") from None
    return ExperimentConfig.from_json_dict(payload)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            cfg = _config_from_args(args)
            if getattr(args, "experiment", None):
                cfg = dataclasses.replace(cfg, experiment=args.experiment)
            agg = run_experiment(cfg)
            for algo in agg.algorithms:
                stats = agg.final_stats(algo)
                if stats["n"] == 0:
                    print(f"{algo}: every trial diverged")
                else:
                    print(f"{algo}: median final error {stats['median']:.6g} over {stats['n']} trials")
            if "gd_small" in agg.algorithms and agg.gd_se_stats()["n"] > 0:
                print(f"gd_se: median early-stopped error {agg.gd_se_stats()['median']:.6g}")
        elif args.command == "scaling":
            cfg = _config_from_args(args)
            table = run_scaling_study(cfg)
            for algo, slope in table["slopes"].items():
                print(f"{algo}: fitted log-log slope {slope}")
        elif args.command == "verify":
            cfg = _config_from_args(args)
            report = run_verify(cfg)
            for entry in report.entries:
                print(f"{entry.check_name}: pass_rate={entry.pass_rate:.3f} (n={entry.n})")
        elif args.command == "plot-data":
            with open(args.aggregate, "r", encoding="utf-8") as fh:
                agg = AggregateResult.from_json_dict(json.load(fh))
            paths = emit_plot_data(agg, args.output_dir)
            for name, path in paths.items():
                print(f"{name}: {path}")
        else:  # pragma: no cover - argparse enforces the choices
            return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllTrialsDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
