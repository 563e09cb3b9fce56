import sys
import logging
import argparse

from typing import Any, Dict, List, Optional

from lsi.cli.commands import cmd_curvature, cmd_estimate, cmd_euler, cmd_minkowski, cmd_simulate
from lsi.cli.config import RunConfig, parse_json_arg
from lsi.cli.selftest import run_selftest
from lsi.estimators.base import EstimatorKind
from lsi.estimators.functionals import EulerMethod
from lsi.exceptions import LevelSetError
from lsi.parallel import set_thread_count


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

RUN_COMMANDS = {
    "estimate": cmd_estimate,
    "curvature": cmd_curvature,
    "euler": cmd_euler,
    "minkowski": cmd_minkowski,
}


def _common(parser: argparse.ArgumentParser) -> None:
    source = parser.add_argument_group("density")
    source.add_argument("--config", help="JSON run configuration (or a previous report); flags override it")
    source.add_argument("--input", help="Sample file: CSV (one point per row) or NDJSON")
    source.add_argument("--field", help="Analytic field as inline JSON or a .json file")
    source.add_argument("--n", type=int, help="Draw a sample of this size from --field")
    source.add_argument("--seed", type=int, help="Seed for --n sampling")
    source.add_argument("--bandwidth", "-H", type=float, help="KDE bandwidth h")
    source.add_argument("--bandwidth-rule", choices=["reference", "selected"],
                        help="Rule for h when --bandwidth is absent")
    source.add_argument("--kernel-order", type=int, help="Kernel order nu (even)")
    source.add_argument("--kernel-smoothness", type=int, help="Kernel smoothness s")

    grid = parser.add_argument_group("grid")
    grid.add_argument("--level", "-c", type=float, help="Level c")
    grid.add_argument("--grid-res", type=int, help="Cells per axis")
    grid.add_argument("--bbox", type=float, nargs="+", help="Lower corner then upper corner")

    out = parser.add_argument_group("output")
    out.add_argument("--out", "-o", help="Output file; stdout when absent")
    out.add_argument("--mesh-out", help="Export the level mesh (OBJ in 3-D, CSV polyline in 2-D)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsi", description="Surface integrals over density level sets.")
    parser.add_argument("--threads", type=int, help="Worker threads (default: LSI_THREADS, then all cores)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="Estimate a surface integral with a confidence interval")
    _common(p)
    p.add_argument("--estimator", choices=list(EstimatorKind.TAGS))
    p.add_argument("--eps", type=float, help="Band/tube half-width")
    p.add_argument("--membership", choices=["fraction", "center"])
    p.add_argument("--tau", type=float, help="Tube width of the variance estimate (0: on the level set)")
    p.add_argument("--integrand", "-g", help="Name (unity, mean_curvature, ...) or JSON expression")
    p.add_argument("--alpha", type=float, help="Miscoverage of the confidence interval")
    p.add_argument("--no-variance", dest="variance", action="store_const", const=False,
                   help="Skip the variance estimate and interval")

    p = sub.add_parser("curvature", help="Curvatures of the level sets through given points")
    _common(p)
    p.add_argument("--points", "-p", help="Point list, same formats as --input")

    p = sub.add_parser("euler", help="Euler characteristic of a level set (3-D)")
    _common(p)
    p.add_argument("--method", choices=list(EulerMethod.TAGS))
    p.add_argument("--eps", type=float, help="Band/tube half-width of band_gb and parallel_gb")
    p.add_argument("--levels", type=float, nargs="+", help="Euler characteristic curve over these levels")

    p = sub.add_parser("minkowski", help="Minkowski functionals of a super-level set")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo study from a JSON configuration")
    p.add_argument("study", help="Study configuration (.json)")
    p.add_argument("--out-dir", "-o", default="study", help="Directory for study.csv, summary.csv, ...")
    p.add_argument("--histograms", action="store_true", help="Write hist_n<N>_<estimator>.svg files")
    p.add_argument("--timing", action="store_true", help="Include run times in the CSV files")

    sub.add_parser("selftest", help="Quick numerical self-checks")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "threads", "verbose", "quiet")}
    if "field" in overrides:
        overrides["field"] = parse_json_arg(overrides["field"])
    if overrides.get("integrand") is not None:
        text = overrides["integrand"].strip()
        overrides["integrand"] = parse_json_arg(text) if text[:1] in "{[" or text.endswith(".json") else text
    return overrides


def run_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_json(args.config) if args.config else RunConfig()
    return base.merged(_overrides(args))


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)

    try:
        if args.threads is not None:
            set_thread_count(args.threads)

        if args.command == "selftest":
            results = run_selftest()
            failed = [r.name for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return EXIT_FAILED_CHECK if failed else EXIT_OK

        if args.command == "simulate":
            cmd_simulate(args.study, args.out_dir, args.histograms, args.timing)
            return EXIT_OK

        RUN_COMMANDS[args.command](run_config(args))
        return EXIT_OK

    except LevelSetError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TypeError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


__all__ = [
    "main",
    "build_parser",
    "run_config",
    "RunConfig",
]
