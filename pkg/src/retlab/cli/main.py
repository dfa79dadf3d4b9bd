"""Console entry point: ``retlab <command> <config>``.

Exit status: 0 when every stage succeeded, 1 when a stage recorded an
error (partial artifacts plus a failure manifest are still written), 2
when the config itself could not be loaded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import RetlabError
from .config import SEED_ENV_VAR, load_config
from .pipeline import COMMANDS, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retlab",
        description=(
            "Monthly return analytics: descriptive statistics, factor "
            "analysis, loss-risk models, unit-root tests, and VAR "
            "forecasting, driven entirely by a config file."
        ),
        epilog=f"Set {SEED_ENV_VAR} to override the configured root seed.",
    )
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage to run")
    parser.add_argument("config", help="path to the run configuration file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(Path(args.config))
    except RetlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
