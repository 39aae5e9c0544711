"""figures <kind> --in <csv> --out <png>: plot dimerwork CSV products."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figures", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path (png, pdf, svg, ...)")
    parser.add_argument("--value", choices=["W", "n1"], default="W", help="contour quantity")
    parser.add_argument("--protocol", default=None, help="contour: protocol to select from the sweep")
    parser.add_argument("--kT", type=float, default=None, help="contour: temperature to select")
    parser.add_argument("--xlim", type=float, nargs=2, default=None)
    parser.add_argument("--ylim", type=float, nargs=2, default=None)
    parser.add_argument("--overlay", default=None, help="optional tauJ,U curve drawn as a red dashed line")
    parser.add_argument("--title", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        output=args.out,
        value=args.value,
        protocol=args.protocol,
        kT=args.kT,
        xlim=tuple(args.xlim) if args.xlim else None,
        ylim=tuple(args.ylim) if args.ylim else None,
        overlay=args.overlay,
        title=args.title,
    )
    try:
        render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
