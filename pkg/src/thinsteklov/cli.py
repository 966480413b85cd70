"""Command line entry point: ``thinsteklov {study,limit,steklov}``."""

import argparse
import logging
import sys

from . import lab
from .errors import ThinSteklovError

log = logging.getLogger("thinsteklov")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="thinsteklov",
        description="Thin-domain biharmonic Steklov eigenvalues versus their 1D limit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "study": "epsilon sweep comparing 2D eigenvalues with the 1D limit",
        "limit": "1D limit problem only (any n)",
        "steklov": "single 2D solve at the first epsilon of the config",
    }
    for name in lab.MODES:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key = value config file (defaults if omitted)")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--quad", type=int, help="Gauss points per element direction")
        p.add_argument("--seed", type=int, default=0, help="reserved; has no effect")
        p.add_argument("--threads", type=int, default=1, help="parallel epsilon jobs")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {"quad": args.quad}
    try:
        if args.config:
            config = lab.load_config(args.config, args.command, overrides)
        else:
            config = lab.parse_config("", args.command, overrides)
        log.info("running %s with %s", args.command, config)
        report = lab.run_convergence_study(config, threads=max(1, args.threads))
        if args.out:
            lab.write_report(report, args.format, args.out)
        else:
            text = lab.report_csv(report) if args.format == "csv" else lab.report_json(report)
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
    except ThinSteklovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
