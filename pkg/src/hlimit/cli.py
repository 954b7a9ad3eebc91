"""Command line entry point: ``hlimit --experiment NAME [options]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or config
error, 3 a limit did not converge within the indices.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .reporting import EXPERIMENTS, ConfigError, ExperimentConfig, emit, load_config


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace("x", ",").split(",") if x)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hlimit", description="Run a named nonlocal H-convergence experiment.")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--grid", type=_ints, help="grid size(s), e.g. 1024 or 6,6,6")
    p.add_argument("--n-max", dest="n_max", type=int, help="largest oscillation index (power of two)")
    p.add_argument("--indices", type=_ints, help="explicit oscillation indices, e.g. 1,2,3")
    p.add_argument("--probe-k", dest="probe_k", type=int, help="probe modes per field component")
    p.add_argument("--tol", type=float, help="verdict tolerance of the headline quantity")
    p.add_argument("--lambdas", type=_floats, help="Laplace parameters for maxwell, e.g. 1,2,4")
    p.add_argument("--out", help="output path, '-' for stdout (default)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int)
    p.add_argument("--curves", help="maxwell only: prefix for per-lambda CSV convergence curves")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    for key in ("experiment", "grid", "n_max", "indices", "probe_k", "tol", "lambdas", "out",
                "format", "seed"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if "experiment" not in data:
        raise ConfigError("an experiment is required (--experiment or config file)")
    try:
        cfg = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, ValueError) as exc:
        sys.stderr.write(f"hlimit: config error: {exc}\n")
        return 2
    if args.curves and cfg.experiment != "maxwell":
        sys.stderr.write("hlimit: config error: --curves applies to the maxwell experiment only\n")
        return 2
    from .experiments import run_experiment
    kwargs = {"curves_prefix": args.curves} if args.curves else {}
    try:
        table = run_experiment(cfg, **kwargs)
    except ConfigError as exc:
        sys.stderr.write(f"hlimit: config error: {exc}\n")
        return 2
    emit(table, cfg.format, cfg.out)
    for name, ok in sorted(table.checks.items()):
        sys.stderr.write(f"{'PASS' if ok else 'FAIL'} {name}\n")
    if not table.converged:
        sys.stderr.write("NOT CONVERGED\n")
    return table.exit_code()


if __name__ == "__main__":
    raise SystemExit(main())
