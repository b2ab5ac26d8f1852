"""
Base command class for eeesim.

This module provides the BaseCommand class that all CLI commands inherit
from. It implements the shared pieces: configuration resolution, trace
loading, report output and the mapping of failures to exit codes.
"""

import argparse
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Optional

from ..config.experiment import RUN_POLICIES, ExperimentConfig
from ..engine.link_sim import SimulationError, TransitionError
from ..engine.selfsimilarity import DegenerateSeriesError
from ..engine.theory import OverloadError, TheoryError
from ..engine.traffic_model import (TraceFormatError, TrafficTrace, ingest_trace_file,
                                    synthesize_poisson_trace, synthesize_trace)
from ..utils.formatters import ReportFormatter
from ..utils.validators import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_OVERLOAD = 3


class CommandError(Exception):
    """Base exception for command execution errors."""
    pass


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add the flags shared by every command.

    Args:
        parser: Sub-command parser
    """
    parser.add_argument('--config', help="key=value experiment file")
    parser.add_argument('--trace', help="packets-csv trace file (same as --set trace.path=...)")
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help="override one configuration key (repeatable)")
    parser.add_argument('--out', help="output directory")
    parser.add_argument('--seed', type=int, help="random seed")
    parser.add_argument('--policy', choices=RUN_POLICIES, help="policy or policies to simulate")


class BaseCommand(ABC):
    """
    Abstract base class for all eeesim commands.

    Subclasses implement ``execute`` and return an exit code;
    ``handle_command`` wraps it with configuration loading, logging and
    error handling.
    """

    def __init__(self):
        """Initialize the base command."""
        self.name = self.__class__.__name__.lower().replace('command', '')
        self.logger = logging.getLogger(f"{__name__}.{self.name}")

    @abstractmethod
    async def execute(self, config: ExperimentConfig, args: argparse.Namespace) -> int:
        """
        Execute the command logic.

        Args:
            config: Resolved experiment configuration
            args: Parsed command-line arguments

        Returns:
            int: Exit code
        """
        pass

    async def handle_command(self, args: argparse.Namespace) -> int:
        """
        Main entry point for command execution with error handling.

        Args:
            args: Parsed command-line arguments

        Returns:
            int: 0 on success, 2 on invalid input, 1 on errors, 3 on overload
        """
        try:
            config = self.load_config(args)

            self.logger.info(f"Executing {self.name} command")
            code = await self.execute(config, args)

            if code == EXIT_OVERLOAD:
                self.logger.warning(f"{self.name} finished with overload flags")
            else:
                self.logger.info(f"Successfully executed {self.name} command")
            return code

        except ValidationError as e:
            print(ReportFormatter.format_error("Invalid input", str(e)))
            self.logger.warning(f"Validation error in {self.name}: {e}")
            return EXIT_VALIDATION

        except (CommandError, TraceFormatError, DegenerateSeriesError,
                OverloadError, TheoryError) as e:
            print(ReportFormatter.format_error("Command failed", str(e)))
            self.logger.error(f"Command error in {self.name}: {e}")
            return EXIT_ERROR

        except (TransitionError, SimulationError) as e:
            print(ReportFormatter.format_error("Simulation failed", str(e)))
            self.logger.error(f"Simulation error in {self.name}: {e}", exc_info=True)
            return EXIT_ERROR

        except OSError as e:
            print(ReportFormatter.format_error("I/O failure", str(e)))
            self.logger.error(f"I/O error in {self.name}: {e}")
            return EXIT_ERROR

        except Exception as e:
            print(ReportFormatter.format_error("Unexpected error", str(e)))
            self.logger.error(f"Unexpected error in {self.name}: {e}", exc_info=True)
            return EXIT_ERROR

    @staticmethod
    def load_config(args: argparse.Namespace) -> ExperimentConfig:
        flags = {
            'run.seed': getattr(args, 'seed', None),
            'run.out_dir': getattr(args, 'out', None),
            'run.policy': getattr(args, 'policy', None),
            'trace.path': getattr(args, 'trace', None),
        }
        return ExperimentConfig.from_sources(
            config_path=getattr(args, 'config', None),
            overrides=getattr(args, 'set', None) or [],
            flags=flags,
        )

    @staticmethod
    def load_trace(config: ExperimentConfig) -> TrafficTrace:
        """
        Produce the trace the configuration points at.

        Reads ``trace.path`` if set, otherwise synthesizes the preset.

        Raises:
            TraceFormatError: If the file cannot be parsed
            ValidationError: If synthesis parameters are invalid
        """
        if config.trace_path:
            return ingest_trace_file(
                config.trace_path,
                strict=config['trace.strict'],
                line_rate_f=config['link.line_rate_bps'],
            )

        duration = config['synth.duration_s']
        tick = config['synth.tick_ms'] / 1e3
        rate = config['synth.line_rate_bps']
        label = f"{config.preset}-seed{config.seed}"

        if config['synth.model'] == 'poisson':
            return synthesize_poisson_trace(config['synth.rate'], config['synth.packet_size_bits'],
                                            duration, tick, rate, config.seed, label)
        return synthesize_trace(config.source_config(), duration, tick, rate, label)

    @staticmethod
    def output_path(config: ExperimentConfig, name: str) -> Path:
        out_dir = config.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        return out_dir / name

    @staticmethod
    def report(config: ExperimentConfig, body: Dict[str, Any],
               name: str, kind: Optional[str] = None) -> Path:
        """Write a JSON report with the ``params`` echo block."""
        document = dict(body)
        document['params'] = config.params_echo()
        if kind:
            document['kind'] = kind
        return ReportFormatter.write_json(BaseCommand.output_path(config, name), document)
