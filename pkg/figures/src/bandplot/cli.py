"""Command line front end: flags mirror the FigureSpec fields."""

from __future__ import annotations

import argparse
import sys

from .errors import OptionError, SchemaError
from .render import FigureSpec, render_bands

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bandplot",
        description="Render shaded percentile band figures from a sweep stats CSV.",
    )
    parser.add_argument("--stats", required=True, help="input stats CSV")
    parser.add_argument("--out", required=True, help="output image path (format by suffix)")
    parser.add_argument("--mu", type=_floats, help="comma-separated mu values (default: all)")
    parser.add_argument("--series", type=_names, help="comma-separated series names (default: all)")
    parser.add_argument(
        "--levels", type=_ints, default=(98, 80),
        help="comma-separated middle-percent band levels (default 98,80)",
    )
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        spec = FigureSpec(
            stats_path=args.stats,
            out_path=args.out,
            mu_values=args.mu,
            series=args.series,
            band_levels=tuple(args.levels),
        )
        out = render_bands(spec)
    except (SchemaError, OptionError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
