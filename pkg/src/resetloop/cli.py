"""Batch command-line front end: per-case analysis, simulation, and export."""

from __future__ import annotations

import argparse
import sys

from . import cases, plot


def _parse_grid(text: str) -> cases.GridSpec:
    try:
        fmin, fmax, ppd = text.split(":")
        return cases.GridSpec(float(fmin), float(fmax), int(ppd))
    except ValueError:
        raise argparse.ArgumentTypeError(
            "grid must be fmin:fmax:points-per-decade, e.g. 1:4000:30"
        ) from None


def _parse_harmonics(text: str) -> tuple[int, ...]:
    try:
        orders = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("harmonics must be a comma list, e.g. 1,3,5") from None
    if any(n < 1 or n % 2 == 0 for n in orders):
        raise argparse.ArgumentTypeError("harmonic orders must be odd and >= 1")
    return orders


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resetloop",
        description="Reset-control loop shaping: case analysis, tuning, and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_commands = ("hosidf", "margins", "tune", "simulate", "sweep", "rms-table")
    for name in run_commands:
        p = sub.add_parser(name, help=f"run the {name} analysis for a case")
        p.add_argument("--config", required=True,
                       help="case config file or preset name (case1..case7)")
        p.add_argument("--out", default="out", help="output directory root")
        p.add_argument("--grid", type=_parse_grid, default=None,
                       help="analysis grid fmin:fmax:points-per-decade")
        p.add_argument("--freq", type=float, default=None,
                       help="reference frequency in Hz (simulate/rms seed point)")
        p.add_argument("--seed", type=int, default=None, help="noise seed override")
        p.add_argument("--harmonics", type=_parse_harmonics, default=None,
                       help="harmonic orders, e.g. 1,3,5,7,9")

    p = sub.add_parser("plot", help="emit gnuplot data and an SVG from an artifact")
    p.add_argument("artifacts", nargs="+", help="artifact CSV file(s)")
    p.add_argument("--kind", required=True, choices=("bode", "sensitivity", "trace"))
    p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        try:
            written = plot.emit_plot_data(args.artifacts, args.kind, args.out)
        except plot.ArtifactError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        for path in written:
            print(path)
        return 0
    return cases.run_case(
        args.config,
        args.command,
        out_dir=args.out,
        grid=args.grid,
        freq_hz=args.freq,
        seed=args.seed,
        harmonics=args.harmonics,
    )


if __name__ == "__main__":
    sys.exit(main())
