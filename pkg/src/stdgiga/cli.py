"""Command-line driver for convergence studies."""
from __future__ import annotations

import argparse
import logging
import sys

from .cases import CASES
from .exceptions import StdgigaError
from .study import StudyConfig, format_table, run_study, write_output


def _degrees(text: str) -> tuple:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid degree list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stdgiga",
        description="Space-time dG isogeometric heat-equation convergence study.",
    )
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--case", choices=sorted(CASES), default="moving-2d")
    src.add_argument("--geometry", help="multipatch geometry JSON file (solved with the sine problem)")
    ap.add_argument("--degrees", type=_degrees, default=(2,), help="comma-separated, e.g. 1,2,3")
    ap.add_argument("--levels", type=int, default=4, help="finest refinement level")
    ap.add_argument("--theta", type=float, default=0.1)
    ap.add_argument("--delta1", type=float, default=None, help="default 2(p+d+1)(p+1)")
    ap.add_argument("--delta2", type=float, default=None, help="default 2(p+d+1)(p+1)")
    ap.add_argument("--quad", type=int, default=None, help="Gauss points per direction for assembly")
    ap.add_argument("--out", default=None, help="output file (stdout if omitted)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = StudyConfig(
            case=args.case, degrees=args.degrees, levels=args.levels, theta=args.theta,
            delta1=args.delta1, delta2=args.delta2, quad=args.quad,
            geometry=args.geometry, out=args.out, format=args.format,
        )
        rows = run_study(cfg)
        if cfg.out is None:
            sys.stdout.write(format_table(rows, cfg.format))
        else:
            write_output(rows, cfg.out, cfg.format)
    except (StdgigaError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
