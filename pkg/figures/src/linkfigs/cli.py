"""plot <kind> --in PATH --out PATH [--group COLS]"""
from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureError, FigureSpec, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plot", description="Render link-simulator result figures")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", required=True, action="append",
                    help="input CSV/JSON file (repeatable)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--group", default=None,
                    help="comma-separated series grouping columns")
    args = ap.parse_args(argv)
    group = [c for c in (args.group or "").split(",") if c]
    try:
        out = render(FigureSpec(inputs=args.inputs, kind=args.kind,
                                out=args.out, group=group))
    except (FigureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
