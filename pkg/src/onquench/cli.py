"""Command-line surface: one subcommand per experiment kind plus plotting.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure. The pipeline is deterministic; --seedless is reserved for
interface compatibility and takes no value.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, NumericsError
from .model import ModelConfig
from .pipeline import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERICAL,
    ExperimentPlan,
    default_out_root,
    run,
)
from .plots import PLOT_KINDS, emit_plot


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _add_common(sub):
    sub.add_argument("--config", required=True, help="path to a run-config JSON")
    sub.add_argument("--out", default=None, help="output directory "
                     "(default: $ONQUENCH_OUT or ./onquench_out)")
    sub.add_argument("--threads", type=int, default=1)
    sub.add_argument("--seedless", action="store_true",
                     help="reserved; the pipeline is deterministic")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onquench",
                                description="Quench dynamics and slab entanglement "
                                            "of the large-N O(N) model (d=3)")
    subs = p.add_subparsers(dest="command", required=True)

    for kind, extra in {
        "rc": [],
        "evolve": [("--times", _parse_floats, "checkpoint times t1,t2,...")],
        "dispersion": [
            ("--t", float, "snapshot time (default: t_end)"),
            ("--q-lo", float, "lowest fit momentum (default: max(5 dq, 2/t))"),
            ("--q-hi", float, "highest fit momentum (default 10/t)"),
            ("--q-points", int, "number of momenta (default 14)"),
        ],
        "gap": [
            ("--ns", _parse_ints, "slab widths in sites, e.g. 25,50,100"),
            ("--times", _parse_floats, "gap sampling times"),
        ],
        "entropy": [
            ("--ns", _parse_ints, "slab widths in sites"),
            ("--times", _parse_floats, "snapshot times"),
        ],
        "modes": [
            ("--ns", _parse_ints, "slab width in sites (first entry used)"),
            ("--times", _parse_floats, "snapshot times"),
            ("--threshold", float,
             "front cumulative-density threshold (default 0.9999, the support edge)"),
        ],
        "delta-scan": [
            ("--deltas", _parse_floats, "quench depths, e.g. -0.5,-1,-2,-4"),
            ("--t", float, "snapshot time (default: t_end)"),
            ("--q-lo", float, "lowest fit momentum (default: max(5 dq, 2/t))"),
            ("--q-hi", float, "highest fit momentum (default 10/t)"),
            ("--q-points", int, "number of momenta (default 14)"),
        ],
    }.items():
        sub = subs.add_parser(kind)
        _add_common(sub)
        for flag, typ, hlp in extra:
            sub.add_argument(flag, type=typ, default=None, help=hlp)

    plot = subs.add_parser("plot")
    plot.add_argument("--table", required=True, help="result CSV to render")
    plot.add_argument("--kind", required=True, choices=PLOT_KINDS)
    plot.add_argument("--out", default=None, help="output directory")
    return p


def _plan_from_args(args) -> ExperimentPlan:
    cfg = ModelConfig.from_json(Path(args.config).read_text())
    kind = {"entropy": "entropy_scan", "delta-scan": "delta_scan"}[args.command] \
        if args.command in ("entropy", "delta-scan") else args.command
    kw = {"kind": kind, "config": cfg}
    if getattr(args, "times", None):
        kw["times"] = args.times
    if getattr(args, "ns", None):
        kw["ns_list"] = args.ns
    if getattr(args, "deltas", None):
        kw["deltas"] = args.deltas
    if getattr(args, "t", None) is not None:
        kw["fit_time"] = args.t
    if getattr(args, "q_lo", None) is not None:
        kw["q_lo"] = args.q_lo
    if getattr(args, "q_hi", None) is not None:
        kw["q_hi"] = args.q_hi
    if getattr(args, "q_points", None) is not None:
        kw["q_points"] = args.q_points
    if getattr(args, "threshold", None) is not None:
        kw["front_threshold"] = args.threshold
    return ExperimentPlan(**kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = Path(args.out) if args.out else default_out_root()
        if args.command == "plot":
            table = Path(args.table)
            dest = out / (table.stem + ".svg")
            emit_plot(table, args.kind, dest)
            print(dest)
            return 0
        plan = _plan_from_args(args)
        manifest = run(plan, out_dir=out, threads=args.threads)
        print(f"wrote {len(manifest.artifacts)} artifacts under {out / plan.kind}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
