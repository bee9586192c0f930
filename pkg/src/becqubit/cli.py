"""Command-line front end.

    becqubit run CONFIG.json [--out DIR] [--seed N]
    becqubit validate CONFIG.json

Exit codes: 0 success, 1 invalid config, 2 numerical failure,
3 inconclusive-dominated run.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import config as configmod
from .errors import BecQubitError, ConfigError
from .experiments import RUNNERS, Outcome

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 1, 2, 3

log = logging.getLogger("becqubit")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_manifest(out: Path, cfg, outcome: Outcome, wall: float, exit_code: int, error: str | None):
    manifest = {
        "experiment": cfg.kind,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "config": cfg.raw,
        "versions": {
            "becqubit": _version(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": outcome.files,
        "failures": outcome.failures,
        "summary": outcome.summary,
        "error": error,
        "exit_code": exit_code,
        "wall_time_s": wall,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def cmd_run(args) -> int:
    try:
        cfg = configmod.load(args.config, seed=args.seed, output=args.out)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"invalid config: {v}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outcome, error = Outcome(), None
    try:
        outcome = RUNNERS[cfg.kind](cfg, out)
    except (BecQubitError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.error("%s experiment failed: %s", cfg.kind, error)
    wall = time.perf_counter() - start

    if error or outcome.failures:
        code = EXIT_NUMERICAL
    elif outcome.inconclusive_dominated:
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_OK
    _write_manifest(out, cfg, outcome, wall, code, error)
    for f in outcome.failures:
        log.warning("failed cell: %s", f)
    print(f"{cfg.kind}: wrote {', '.join(outcome.files) or 'no results'} to {out} (exit {code})")
    return code


def cmd_validate(args) -> int:
    try:
        raw = configmod.read_json(args.config)
        violations = configmod.check(raw)
    except ConfigError as exc:
        violations = exc.violations
    if violations:
        for v in violations:
            print(v)
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="becqubit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--seed", type=int, help="random seed (overrides the config)")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="list config violations without running")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
