"""Command line entry point: run experiments, convergence studies, list the registry.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import NumericalFailure, convergence, emit, run
from .problems import EXAMPLES, ConfigError, ExperimentConfig


def _add_run_args(p):
    p.add_argument("--example", required=True, help="experiment id (see `sldg list`)")
    p.add_argument("--k", type=int, default=None, help="polynomial degree")
    p.add_argument("--M", type=int, default=None, help="cells (first axis)")
    p.add_argument("--M2", type=int, default=None, help="cells along the second axis (2D)")
    p.add_argument("--N", type=int, default=None, help="time steps")
    p.add_argument("--scheme", default=None, help="scheme selector for the example")
    p.add_argument("--cfl", type=float, default=None, help="derive the time step from a CFL number")
    p.add_argument("--dt", type=float, default=None, help="explicit time step")
    p.add_argument("--T", type=float, default=None, help="final time override")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", default="csv", choices=["csv", "md", "json"])
    p.add_argument("--parallel", action="store_true", help="allow threaded kernels (timings are marked)")
    p.add_argument("--config", default=None, help="JSON file with config fields; flags override")


def _build_config(args) -> ExperimentConfig:
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    for name in ("example", "k", "M", "M2", "N", "scheme", "cfl", "dt", "T"):
        v = getattr(args, name)
        if v is not None:
            fields[name] = v
    if args.parallel:
        fields["parallel"] = True
    example = fields.get("example")
    if example not in EXAMPLES:
        raise ConfigError(f"unknown example {example!r}")
    ex = EXAMPLES[example]
    fields.setdefault("k", ex.default_k)
    if "M" not in fields:
        raise ConfigError("M is required")
    fields.setdefault("N", 0)
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sldg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    _add_run_args(p_run)

    p_conv = sub.add_parser("convergence", help="run a refinement study (M, N doubling)")
    _add_run_args(p_conv)
    p_conv.add_argument("--levels", type=int, default=4)

    sub.add_parser("list", help="print the experiment registry")

    args = parser.parse_args(argv)

    if args.command == "list":
        for ex in EXAMPLES.values():
            schemes = ",".join(ex.schemes)
            print(f"{ex.id:8s} {ex.dim}D  schemes[{schemes}]  default k={ex.default_k} T={ex.T}")
            print(f"         {ex.title}")
        return 0

    try:
        cfg = _build_config(args)
        if args.command == "run":
            rows = [run(cfg)]
        else:
            rows = convergence(cfg, args.levels)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3

    if args.out:
        emit(rows, args.format, args.out)
    else:
        sys.stdout.write(emit(rows, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
