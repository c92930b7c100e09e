"""Command line front end.

    taxislab run <config> [--out DIR] [--seed N]
    taxislab sweep <config> --deltas d1,d2,... [--out DIR]
    taxislab validate <config>

Exit codes: 0 all checks passed, 1 a numerical invariant or verdict failed,
2 the invocation or configuration was unusable.  Identical config and seed
give bit-identical CSV artifacts; floats are written with repr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config, serialize
from .experiments import run_experiment, sweep_v0_mass
from .solver import SolverInvariantError

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxislab",
        description="degenerate taxis-consumption laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write its artifacts")
    p_run.add_argument("config", help="experiment config file")
    p_run.add_argument("--out", default=None,
                       help="artifact directory (default taxislab_out/<experiment>)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the experiment's random seed")

    p_sweep = sub.add_parser("sweep", help="scan initial signal masses for the "
                                           "pattern threshold")
    p_sweep.add_argument("config", help="E3_pattern_threshold config file")
    p_sweep.add_argument("--deltas", required=True,
                         help="comma-separated list of signal masses")
    p_sweep.add_argument("--out", default=None,
                         help="artifact directory (default taxislab_out/sweep)")

    p_val = sub.add_parser("validate", help="parse a config and echo its "
                                            "fully-defaulted form")
    p_val.add_argument("config", help="config file to check")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out = Path(args.out) if args.out else Path("taxislab_out") / config.experiment
    result = run_experiment(config, out, seed=args.seed)
    for line in result.lines:
        print(line)
    print(f"artifacts in {out}")
    return 0 if result.passed else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    try:
        deltas = [float(tok) for tok in args.deltas.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--deltas expects comma-separated numbers, got {args.deltas!r}")
    if not deltas:
        raise ConfigError("--deltas needs at least one mass")
    out = Path(args.out) if args.out else Path("taxislab_out") / "sweep"
    report = sweep_v0_mass(config, deltas, out_dir=out)
    print("delta,ratio,net_movement_proxy")
    for d, r, p in zip(report.deltas, report.ratios, report.proxies):
        print(f"{d!r},{r!r},{p!r}")
    ok = True
    if report.threshold is None:
        print("FAIL threshold_found: no mass kept the nonconstancy ratio at 0.5")
        ok = False
    else:
        print(f"PASS threshold_found: pattern survives up to mass {report.threshold!r}")
    trend = "PASS" if report.monotone_ok else "FAIL"
    print(f"{trend} movement_trend: net movement shrinks along the decreasing "
          f"masses (one inversion tolerated)")
    ok = ok and report.monotone_ok
    if report.threshold is not None:
        conservative = report.delta_hat <= report.threshold
        tag = "PASS" if conservative else "FAIL"
        print(f"{tag} prediction_conservative: delta_hat = {report.delta_hat:.4e} "
              f"vs empirical threshold {report.threshold!r}")
        ok = ok and conservative
    print(f"artifacts in {out}")
    return 0 if ok else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    print(f"ok: {config.experiment}")
    print(serialize(config), end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverInvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
