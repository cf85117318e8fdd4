"""Command-line runner: ``fermibundle <experiment> [--config F] [--out D] [--seed S] [--tol T]``.

Exit status 0 when the experiment's checks pass, 1 when they fail and 2
for usage errors.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .experiments import RUNNERS, RunConfig, parse_config_text
from .export import write_csv, write_json


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermibundle", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="experiment", metavar="experiment")
    for name in RUNNERS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat key = value file")
        s.add_argument("--out", type=Path, help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
    return p


def make_config(args) -> RunConfig:
    data = {}
    if args.config is not None:
        data.update(parse_config_text(args.config.read_text()))
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        data[k.strip()] = v.strip()
    data["experiment"] = args.experiment
    if args.seed is not None:
        data["seed"] = args.seed
    if args.tol is not None:
        data["tol"] = args.tol
    if args.out is not None:
        data["out"] = str(args.out)
    return RunConfig.from_mapping(data)


def run(cfg: RunConfig) -> int:
    runner = RUNNERS[cfg.experiment]
    start = time.perf_counter()
    try:
        outcome = runner(cfg)
    except ValueError as exc:
        print(f"{cfg.experiment}: error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - start
    out = Path(cfg.out)
    files = {}
    for name, (header, rows) in sorted(outcome.tables.items()):
        fname = f"{cfg.experiment}-{name}.csv"
        write_csv(out / fname, header, rows)
        files[name] = fname
    report = {"experiment": cfg.experiment, "config": cfg.to_json(), "version": __version__,
              "ok": bool(outcome.ok), "results": outcome.results, "tables": files,
              "wall_time_s": round(wall, 6)}
    path = write_json(out / f"{cfg.experiment}.json", report)
    status = "PASS" if outcome.ok else "FAIL"
    print(f"{cfg.experiment}: {status} ({wall:.2f} s) -> {path}")
    return 0 if outcome.ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = make_config(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
