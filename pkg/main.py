# main.py
"""
mobforge - travel diary synthesis from survey data
Command-line entry point.
"""
import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from core.application import Application
from core.errors import ConfigError
from core.managers import ConfigManager
from services.command_handler import COMMANDS, help_text
from utils.exception_handler import report_error, setup_exception_hook

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobforge",
        description="Synthesize travel diaries from survey data.",
        epilog=help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=list(COMMANDS))
    parser.add_argument("--config", type=Path, help="TOML or YAML run configuration")
    parser.add_argument("--seed", type=int, help="override run_seed")
    parser.add_argument("--backend", choices=("remote", "scripted", "replay"), help="override backend.kind")
    parser.add_argument("--workers", type=int, help="override workers")
    parser.add_argument("--out", type=Path, help="override paths.output_dir")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or "INFO").upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    setup_exception_hook()

    overrides = {
        "run_seed": args.seed,
        "backend.kind": args.backend,
        "workers": args.workers,
        "paths.output_dir": str(args.out.resolve()) if args.out else None,
        "log_level": args.log_level.upper() if args.log_level else None,
    }
    output_dir = args.out
    try:
        config = ConfigManager(args.config, overrides).run_config()
        output_dir = config.output_dir
        logger.info(f"mobforge {args.subcommand}: seed {config.run_seed}, backend '{config.backend.kind}'")
        artifacts = asyncio.run(Application(config).run(args.subcommand))
        for path in artifacts:
            logger.info(f"Wrote {path}")
        return 0
    except ConfigError as e:
        report_error(e, output_dir)
        return 2
    except KeyboardInterrupt:
        logger.info("Interrupted by user.")
        return 130
    except Exception as e:
        logger.critical(f"mobforge {args.subcommand} failed: {e}", exc_info=True)
        report_error(e, output_dir)
        return 1


if __name__ == "__main__":
    sys.exit(main())
