"""ranemu-plots: render comparison figures from metrics files.

Inputs are LABEL=PATH[,PATH...] tokens; a bare path labels itself with
its file stem. Aggregates are printed one line per point so runs can
be diffed or checked without opening the image.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .figures import KINDS, plot_figure
from .reader import WARMUP_MS, MetricsFormatError


class _Parser(argparse.ArgumentParser):
    # usage and input-syntax problems exit 1; 2 is reserved for bad data
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ranemu-plots",
                description="Aggregate ranemu metrics files and render "
                            "one comparison figure.")
    p.add_argument("--kind", required=True, choices=KINDS,
                   help="figure kind")
    p.add_argument("--inputs", required=True, nargs="+", metavar="LABEL=PATH[,PATH...]",
                   help="one series per token; bare paths use the file stem")
    p.add_argument("--out", required=True, metavar="IMAGE",
                   help="output image path (format from extension)")
    p.add_argument("--ue", type=int, default=0, metavar="N",
                   help="tracked UE for per-UE kinds (default: 0)")
    p.add_argument("--warmup-ms", type=float, default=WARMUP_MS, metavar="F",
                   help=f"rows before this time are discarded (default: {WARMUP_MS:g})")
    return p


def parse_inputs(tokens: list[str]) -> list[tuple[str, list[str]]]:
    """Turn LABEL=PATH[,PATH...] tokens into ordered (label, paths) pairs."""
    out = []
    seen = set()
    for tok in tokens:
        label, sep, rest = tok.partition("=")
        if not sep:
            rest = tok
            label = os.path.splitext(os.path.basename(tok.split(",")[0]))[0]
        if not label:
            raise ValueError(f"empty label in {tok!r}")
        if label in seen:
            raise ValueError(f"duplicate label {label!r}")
        seen.add(label)
        paths = [p for p in rest.split(",") if p]
        if not paths:
            raise ValueError(f"no paths in {tok!r}")
        out.append((label, paths))
    return out


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        inputs = parse_inputs(args.inputs)
    except ValueError as exc:
        parser.error(str(exc))
    if args.warmup_ms < 0:
        parser.error("--warmup-ms must be >= 0")

    try:
        series = plot_figure(args.kind, inputs, args.out,
                             ue_id=args.ue, warmup_ms=args.warmup_ms)
    except MetricsFormatError as exc:
        print(f"ranemu-plots: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ranemu-plots: cannot write figure: {exc}", file=sys.stderr)
        return 2

    for s in series:
        for x, y in zip(s.x, s.y):
            print(f"[aggregate] kind={args.kind} label={s.label} "
                  f"x={x:.9f} y={y:.9f} units={s.units}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
