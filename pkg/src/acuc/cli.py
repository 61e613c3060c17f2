"""Command line entry point: ``acuc <mode> --instance ...`` and ``acuc generate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .case_io import builtin_case, builtin_case_names, load_case
from .instance_gen import generate_instance, load_instance, save_instance
from .runs import MODES, RunOptions, format_table, reports_to_csv


def _network(spec: str):
    if spec in builtin_case_names():
        return builtin_case(spec)
    return load_case(spec)


def resolve_instance(spec: str, seed: int):
    """A saved instance (``.json``), a MATPOWER file or a bundled case name."""
    if spec.endswith(".json"):
        return load_instance(spec)
    net = _network(spec)
    return generate_instance(net, seed=seed, name=f"{Path(spec).stem}-TYP")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acuc", description="Unit commitment with AC power flows")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for solver detail")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} pipeline")
        p.add_argument("--instance", required=True, help="instance .json, MATPOWER .m file or bundled case name")
        p.add_argument("--blocks", type=int, default=4, help="blocks for the decomposition")
        p.add_argument("--cut-rounds", type=int, default=5)
        p.add_argument("--mip-gap", type=float, default=0.001, help="relative gap target")
        p.add_argument("--time-limit", type=float, default=3600.0, help="seconds")
        p.add_argument("--seed", type=int, default=1, help="seed when generating from a case")
        p.add_argument("--out", help="write the report as CSV")
    g = sub.add_parser("generate", help="write a 24-period instance generated from a case")
    g.add_argument("--case", required=True, help="MATPOWER .m file or bundled case name")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="instance .json")
    g.add_argument("--include-max-profile", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(name)s: %(message)s")
    if args.mode == "generate":
        net = _network(args.case)
        inst = generate_instance(net, seed=args.seed, include_max_profile=args.include_max_profile,
                                 name=f"{Path(args.case).stem}-TYP")
        save_instance(inst, args.out)
        print(f"wrote {args.out}: {net.n_bus} buses, {net.n_gen} generators, {inst.horizon} periods")
        return 0
    inst = resolve_instance(args.instance, args.seed)
    opts = RunOptions(mip_gap=args.mip_gap, time_limit=args.time_limit, cut_rounds=args.cut_rounds,
                      blocks=args.blocks)
    report = MODES[args.mode](inst, opts)
    print(format_table([report]))
    if args.out:
        Path(args.out).write_text(reports_to_csv([report]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
