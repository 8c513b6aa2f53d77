"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 data error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import pipeline
from .errors import ConfigError, DataError, HdbiError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DATA = 2
EXIT_IO = 3

_STAGE_COMMANDS = {
    "ingest": ["ingest"],
    "score": ["score"],
    "aggregate": ["aggregate"],
    "project": ["project"],
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML or JSON pipeline config")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--splice-year", type=int, help="first year taken from the new-methodology files")
    common.add_argument("--map", dest="commodity_map", help="commodity map CSV replacing the configured one")
    common.add_argument(
        "--scenario", action="append", dest="scenarios", help="project only this scenario (repeatable)"
    )
    common.add_argument("--format", choices=["csv"], default="csv", help="output format (csv only)")

    p = argparse.ArgumentParser(prog="hdbi", description="Healthy Diet Basket index pipeline")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check config and inputs, write nothing")
    sub.add_parser("ingest", parents=[common], help="parse and splice FBS files into supply.csv")
    sub.add_parser("score", parents=[common], help="country-year food groups and HDBI")
    sub.add_parser("aggregate", parents=[common], help="regional panels and decade summaries")
    sub.add_parser("project", parents=[common], help="scenario trajectories to 2050")
    sub.add_parser("run", parents=[common], help="validate, then every enabled stage")
    return p


def _load(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(args.config)
    if args.splice_year is not None:
        cfg.splice_year = args.splice_year
    if args.commodity_map is not None:
        # command-line paths are relative to the working directory
        cfg.commodity_map = str(Path(args.commodity_map).resolve())
    if args.scenarios:
        cfg.scenarios = list(args.scenarios)
    if args.out is not None:
        cfg.output_dir = args.out
    elif cfg.output_dir is not None:
        cfg.output_dir = cfg.resolve(cfg.output_dir)
    return cfg


def _err(msg: str) -> None:
    print(f"hdbi: {msg}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "project" and "project" not in cfg.stages:
            cfg.stages = list(cfg.stages) + ["project"]
        violations = pipeline.validate(cfg)
        if args.command == "validate" or violations:
            for v in violations:
                print(v, file=sys.stderr if violations else sys.stdout)
            if violations:
                _err(f"{len(violations)} validation problem(s)")
                return EXIT_INVALID
            print("ok")
            return EXIT_OK
        stages = None if args.command == "run" else _STAGE_COMMANDS[args.command]
        written = pipeline.run(cfg, stages=stages)
        for name in written:
            print(name)
        return EXIT_OK
    except ConfigError as e:
        _err(str(e))
        return EXIT_INVALID
    except pipeline.StageError as e:
        _err(str(e))
        if isinstance(e.cause, ConfigError):
            return EXIT_INVALID
        return EXIT_DATA if isinstance(e.cause, DataError) else EXIT_IO
    except DataError as e:
        _err(str(e))
        return EXIT_DATA
    except HdbiError as e:
        _err(str(e))
        return EXIT_DATA
    except OSError as e:
        _err(str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
