"""Command line entry point: simulate, sweep, plot, validate."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .dynamics import check_step_halving
from .linalg import ContractError, hermiticity_error
from .model import battery_ground_state, build_operators
from .plot import PLOTTABLE, emit_plot
from .sweep import (
    PRESET_IDS,
    SweepPlan,
    UsageError,
    format_spec,
    load_config,
    parse_number,
    preset,
    run_sweep,
    simulate,
)

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qbattery", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="run")
    s.add_argument("--check-dt", action="store_true", help="also run at dt/2 and compare")
    s.add_argument("--allow-nonpositive", action="store_true")

    w = sub.add_parser("sweep", help="run a figure preset or a custom one-parameter sweep")
    src = w.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_IDS)
    src.add_argument("--config")
    w.add_argument("--vary", help="parameter to sweep (with --config)")
    w.add_argument("--values", help="comma-separated values, e.g. 0.7pi,1.3pi")
    w.add_argument("--t-max", type=float, help="override t_max")
    w.add_argument("--dt", type=float, help="override dt")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", default=None)
    w.add_argument("--check-dt", action="store_true")
    w.add_argument("--allow-nonpositive", action="store_true")

    pl = sub.add_parser("plot", help="SVG chart of one quantity from a run directory")
    pl.add_argument("--in", dest="in_dir", required=True)
    pl.add_argument("--quantity", required=True, choices=PLOTTABLE)
    pl.add_argument("--out", default=None)

    v = sub.add_parser("validate", help="check a config without integrating")
    v.add_argument("--config", required=True)
    v.add_argument("--check-dt", action="store_true", help="run the step-halving check too")
    return p


def _values(text: str) -> tuple:
    return tuple(parse_number(v) for v in text.split(",") if v.strip())


def _numerics(args) -> dict:
    out = {}
    if args.t_max is not None:
        out["t_max"] = args.t_max
    if args.dt is not None:
        out["dt"] = args.dt
    return out


def _cmd_simulate(args) -> int:
    spec = load_config(args.config)
    art = simulate(spec, args.out, check_dt=args.check_dt, allow_nonpositive=args.allow_nonpositive)
    print(f"wrote {art.out_dir / art.files[0]} ({art.status[0]})")
    return EXIT_OK if art.ok else EXIT_PHYSICS


def _cmd_sweep(args) -> int:
    if args.preset:
        values = _values(args.values) if args.values else None
        plan = preset(args.preset, values, **_numerics(args))
    else:
        if not args.vary or not args.values:
            raise UsageError("--config sweeps need --vary and --values")
        base = load_config(args.config).replace(**_numerics(args))
        plan = SweepPlan(base, args.vary, _values(args.values))
    out = args.out or plan.label
    art = run_sweep(
        plan, out, args.jobs, check_dt=args.check_dt, allow_nonpositive=args.allow_nonpositive
    )
    for name, st in zip(art.files, art.status):
        print(f"{name}: {st}")
    print(f"manifest: {art.manifest_path}")
    return EXIT_OK if art.ok else EXIT_PHYSICS


def _cmd_plot(args) -> int:
    path = emit_plot(args.in_dir, args.quantity, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    spec = load_config(args.config)
    ops = build_operators(spec)
    h = ops.h_static
    num = ops.excitation_number
    e_g, _ = battery_ground_state(ops.h_battery_reduced)
    print(format_spec(spec), end="")
    print(f"# hilbert dim = {ops.fact.total_dim}")
    print(f"# static H hermiticity error = {hermiticity_error(h):.3e}")
    print(f"# [H, N_exc] norm = {np.linalg.norm(h @ num - num @ h):.3e}")
    print(f"# battery ground energy E_g = {e_g!r}")
    if args.check_dt:
        check_step_halving(spec)
        print("# step-halving check passed")
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuntimeError as exc:
        # PositivityError / StepSizeError from validate --check-dt
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
