"""
Synth command for eeesim.

Generates a synthetic trace from a preset (plus any overrides) and writes
it as packets-csv.
"""

import argparse
import logging

from .base import EXIT_OK, BaseCommand, add_common_arguments
from ..config.experiment import ExperimentConfig
from ..engine.traffic_model import export_trace_file, trace_stats
from ..utils.formatters import ReportFormatter
from ..utils.presets import PresetManager
from ..utils.validators import ValidationError

logger = logging.getLogger(__name__)


class SynthCommand(BaseCommand):
    """
    Command to synthesize a trace.

    This command handles:
    - Preset resolution (randomized presets draw from the seed)
    - Superposed Pareto ON/OFF or Poisson control synthesis
    - Writing the trace file and printing its summary
    """

    async def execute(self, config: ExperimentConfig, args: argparse.Namespace) -> int:
        if config.trace_path:
            raise ValidationError("synth builds traces from presets; unset trace.path")

        trace = self.load_trace(config)
        stats = trace_stats(trace, config['strategy.T_B_ms'] / 1e3)

        name = args.name or f"{trace.label}.csv"
        path = export_trace_file(trace, self.output_path(config, name))

        print(ReportFormatter.format_trace_summary(trace, stats))
        print(ReportFormatter.format_success(f"Trace written to {path}"))
        return EXIT_OK


def setup_synth_command(subparsers: argparse._SubParsersAction) -> None:
    """
    Set up the synth command.

    Args:
        subparsers: Sub-command registry of the main parser
    """
    synth_cmd = SynthCommand()

    parser = subparsers.add_parser(
        'synth',
        help="synthesize a trace file",
        description="Synthesize a trace. Presets:\n" + PresetManager.format_preset_list(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    add_common_arguments(parser)
    parser.add_argument('--name', help="trace file name inside the output directory")
    parser.set_defaults(command=synth_cmd)
