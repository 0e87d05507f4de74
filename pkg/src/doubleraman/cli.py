"""Command-line front end.

Usage::

    doubleraman SUBCOMMAND [--config PATH] [--out DIR] [--jobs N]
                [--rel-tol X] [--abs-tol X] [--seedless] [--set SECTION.KEY=VALUE ...]

Subcommands: efficiency-map, compare, sequence, interferometer,
averaging-check, optimize.  Failures print a one-line JSON error object to
stderr and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import filecmp
import json
import logging
import shutil
import sys
import tempfile
import time
from pathlib import Path

from .config import ConfigError, load_config
from .core import RamanError
from .dynamics import KernelCache
from .reports import COMMANDS

log = logging.getLogger("doubleraman")

EXIT_FAILURE = 1
EXIT_CHECK_FAILED = 2
EXIT_NONDETERMINISTIC = 3

_HELP = {
    "efficiency-map": "efficiency over pulse duration x packet width, with the optimal duration",
    "compare": "per-width efficiencies of all beam splitters, the sequence and the mirror",
    "sequence": "three-pulse sequence against its individual pulses",
    "interferometer": "Mach-Zehnder fringes, amplitude and contrast",
    "averaging-check": "method-of-averaging coefficients versus full box-pulse dynamics",
    "optimize": "single-cell (alpha, beta) optimization with its trace",
}


class NondeterminismError(RuntimeError):
    pass


def build_parser():
    parser = argparse.ArgumentParser(prog="doubleraman", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides run.out)")
    common.add_argument("--jobs", type=int, help="worker processes for kernel and map computation")
    common.add_argument("--rel-tol", type=float, help="relative integration tolerance")
    common.add_argument("--abs-tol", type=float, help="absolute integration tolerance")
    common.add_argument("--seedless", action="store_true",
                        help="run twice without a kernel cache and require byte-identical CSV/JSON")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress and cache hits")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def _overrides(args):
    overrides = {"run.out": args.out, "run.jobs": args.jobs, "run.rel_tol": args.rel_tol,
                 "run.abs_tol": args.abs_tol}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    return {k: (str(v) if v is not None else None) for k, v in overrides.items()}


def _run_once(command, config, out_dir, use_cache=True):
    directory = (config.run.cache_dir or None) if use_cache else None
    cache = KernelCache(directory, jobs=config.run.jobs)
    summary, files = COMMANDS[command](config, out_dir, cache)
    log.info("kernel cache: %d hits, %d misses", cache.hits, cache.misses)
    return summary, files


def _run_seedless(command, config, out_dir):
    """Run twice in scratch directories without caching, compare the CSV and
    JSON outputs byte for byte and keep the first run's files."""
    with tempfile.TemporaryDirectory(prefix="doubleraman-") as scratch:
        first, second = Path(scratch) / "a", Path(scratch) / "b"
        summary, files = _run_once(command, config, first, use_cache=False)
        _run_once(command, config, second, use_cache=False)
        checked = [f for f in files if f.endswith((".csv", ".json"))]
        _, mismatch, errors = filecmp.cmpfiles(first, second, checked, shallow=False)
        if mismatch or errors:
            raise NondeterminismError(f"outputs differ between identical runs: {sorted(mismatch + errors)}")
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in files:
            shutil.copy2(first / name, out_dir / name)
    return summary, files


def _error(command, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, _overrides(args))
        out_dir = Path(config.run.out)
        start = time.perf_counter()
        if args.seedless:
            summary, files = _run_seedless(args.command, config, out_dir)
        else:
            summary, files = _run_once(args.command, config, out_dir)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - start)
    except NondeterminismError as exc:
        _error(args.command, exc)
        return EXIT_NONDETERMINISTIC
    except (RamanError, ConfigError, ValueError, OSError) as exc:
        _error(args.command, exc)
        return EXIT_FAILURE
    print(json.dumps({"command": args.command, "out": str(out_dir), "files": sorted(files),
                      "config_hash": config.hash()}))
    if args.command == "averaging-check" and not summary["passed"]:
        return EXIT_CHECK_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
