"""Command-line entry point.

Exit codes: 0 success, 2 configuration problem, 3 missing prerequisite
artifacts, 1 any other failure.
"""

from __future__ import annotations

import argparse
import sys

from .icl import ConfigurationError, TransportError
from .ontology import OboParseError
from .runner import (STAGES, ConfigError, ExperimentConfig, PrerequisiteError,
                     cmd_eval, cmd_gen, cmd_icl, cmd_ingest, cmd_report,
                     cmd_simulate, cmd_train)
from .taskgen import DatasetFormatError, GenerationError

_COMMANDS = {
    "ingest": cmd_ingest,
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "icl": cmd_icl,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgcurate",
        description="Knowledge-graph curation benchmark pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="experiment YAML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed from the config")
        p.add_argument("--out", default=None,
                       help="override the output directory from the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.load(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.out is not None:
            config.out_dir = args.out
        _COMMANDS[args.command](config)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PrerequisiteError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return 3
    except (OboParseError, GenerationError, DatasetFormatError,
            TransportError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
