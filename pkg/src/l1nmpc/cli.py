"""Command line entry point: ``l1nmpc run|sweep|compare|report``.

Exit codes: 0 success, 1 configuration error, 2 crash during a run,
3 input/output error.
"""
import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, InvalidArgument
from .harness import report as rep
from .harness.config import CONTROLLERS, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CRASH, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("l1nmpc")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for crashes here
    def error(self, message):
        raise ConfigError(message)


def _float_list(text):
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse speed list {text!r}") from None
    if not values or any(not v > 0 for v in values):
        raise ConfigError("speeds must be positive numbers")
    return values


def _controller_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [n for n in names if n not in CONTROLLERS]
    if bad or not names:
        raise ConfigError(f"unknown controllers {bad}; choose from {', '.join(CONTROLLERS)}")
    return names


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="runs", help="output directory (default: runs)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    p = _Parser(prog="l1nmpc", description="Closed-loop NMPC / L1-NMPC quadrotor experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run", parents=[common], help="fly one scenario file")
    s.add_argument("scenario")

    s = sub.add_parser("sweep", parents=[common], help="fly a circle template at several speeds")
    s.add_argument("template")
    s.add_argument("--speeds", type=str, default="2.5,4,6,8,10")
    s.add_argument("--controllers", type=str, default=",".join(CONTROLLERS))

    s = sub.add_parser("compare", parents=[common], help="fly one scenario with several controllers")
    s.add_argument("scenario")
    s.add_argument("--controllers", type=str, default=",".join(CONTROLLERS))

    s = sub.add_parser("report", parents=[common], help="recompute metrics tables from saved logs")
    s.add_argument("dir")
    return p


def _load(path, seed):
    cfg = load_scenario(path)
    if seed is not None:
        cfg = replace(cfg, seed=seed, wind=replace(cfg.wind, seed=seed))
    return cfg


def _emit(results, out, quiet):
    path = rep.write_report(results, out)
    if not quiet:
        print(rep.format_table(results))
        print(f"wrote {path}")


def _main(args):
    if args.command == "run":
        cfg = _load(args.scenario, args.seed)
        result = rep.run_one(cfg)
        _emit([result], args.out, args.quiet)
        return EXIT_OK if result.status == "ok" else EXIT_CRASH

    if args.command in ("sweep", "compare"):
        controllers = _controller_list(args.controllers)
        if args.command == "sweep":
            speeds = _float_list(args.speeds)
            results = rep.sweep(_load(args.template, args.seed), speeds, controllers)
        else:
            results = rep.compare(_load(args.scenario, args.seed), controllers)
        _emit(results, args.out, args.quiet)
        # vehicle crashes are table entries; only software failures fail the command
        return EXIT_CRASH if any(r.status == "error" for r in results) else EXIT_OK

    out = args.out if args.out != "runs" else args.dir
    try:
        results = rep.load_results(args.dir)
    except InvalidArgument as exc:
        raise OSError(str(exc)) from exc
    path = rep.write_report(results, out, write_logs=False)
    if not args.quiet:
        print(rep.format_table(results))
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"l1nmpc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _main(args)
    except ConfigError as exc:
        print(f"l1nmpc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"l1nmpc: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        log.exception("run failed")
        print(f"l1nmpc: crashed: {exc}", file=sys.stderr)
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
