"""Command-line entry point.

Exit codes: 0 success, 1 usage problems, 2 data problems (schema, parsing,
domain violations), 3 internal errors.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from . import commands
from .config import load_config
from .errors import ArtifactError, DomainError, ParseError, SchemaError

COMMANDS = {
    "synth": commands.cmd_synth,
    "explore": commands.cmd_explore,
    "screen": commands.cmd_screen,
    "tune": commands.cmd_tune,
    "train": commands.cmd_train,
    "evaluate": commands.cmd_evaluate,
    "explain": commands.cmd_explain,
    "report": commands.cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; usage is 1 here
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triagekit",
                     description="Train, tune, evaluate, explain and serve "
                                 "special-care triage models.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override [run].seed")
        p.add_argument("--out", default=None, help="override [run].out")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = sub.add_parser("serve", help="serve trained model artifacts over HTTP")
    p.add_argument("--artifact-dir", required=True, help="directory with model_*.json")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"triagekit: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1

    try:
        if args.command == "serve":
            from .serve import run_server

            run_server(args.artifact_dir, args.port, quiet=args.quiet)
            return 0
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
            config.smote = type(config.smote)(
                k_neighbors=config.smote.k_neighbors,
                target_ratio=config.smote.target_ratio,
                undersample_majority=config.smote.undersample_majority,
                seed=args.seed,
            )
        if args.out is not None:
            config.out = args.out
        COMMANDS[args.command](config, quiet=args.quiet)
        return 0
    except (SchemaError, ParseError, DomainError, ArtifactError) as exc:
        print(f"triagekit: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
