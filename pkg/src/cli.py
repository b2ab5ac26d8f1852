"""
Command-line entry point for eeesim.

Sets up logging, registers the sub-commands and dispatches to the selected
command. Run with: python -m src.cli <command> [options]
"""

import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from .config.settings import settings, validate_environment
from .commands.base import EXIT_ERROR, EXIT_VALIDATION
from .commands.synth import setup_synth_command
from .commands.analyze import setup_analyze_command
from .commands.simulate import setup_simulate_command
from .commands.sweep import setup_sweep_command

logger = logging.getLogger(__name__)


def configure_logging() -> None:
    """Log to stderr and, unless EEESIM_LOG_FILE is empty, to a UTF-8 file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE, encoding='utf-8'))

    logging.basicConfig(
        level=logging.INFO if not settings.DEBUG else logging.DEBUG,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


def build_parser() -> argparse.ArgumentParser:
    """Main parser with one sub-command per module."""
    parser = argparse.ArgumentParser(
        prog='eeesim',
        description="Energy Efficient Ethernet link policy simulator",
    )
    subparsers = parser.add_subparsers(dest='command_name', metavar='command')
    subparsers.required = True

    setup_synth_command(subparsers)
    setup_analyze_command(subparsers)
    setup_simulate_command(subparsers)
    setup_sweep_command(subparsers)
    return parser


async def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run the selected command.

    Returns:
        int: Process exit code
    """
    args = build_parser().parse_args(argv)

    try:
        validate_environment()
    except ValueError:
        return EXIT_VALIDATION

    return await args.command.handle_command(args)


def run(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        return asyncio.run(main(argv))
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_ERROR


if __name__ == "__main__":
    if sys.version_info < (3, 8):
        print("Error: Python 3.8 or higher is required")
        sys.exit(1)

    sys.exit(run())
