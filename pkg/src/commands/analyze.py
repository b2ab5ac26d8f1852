"""
Analyze command for eeesim.

Estimates the Hurst parameter of a trace with the variance-time method and
writes the variance-time points for plotting.
"""

import argparse
import logging

from .base import EXIT_OK, BaseCommand, add_common_arguments
from ..config.experiment import ExperimentConfig
from ..engine.selfsimilarity import estimate_hurst
from ..engine.traffic_model import bin_trace
from ..utils.formatters import ReportFormatter

logger = logging.getLogger(__name__)


class AnalyzeCommand(BaseCommand):
    """
    Command to estimate the self-similarity of a trace.

    Writes ``variance_time.csv`` and ``hurst.json`` to the output directory.
    """

    async def execute(self, config: ExperimentConfig, args: argparse.Namespace) -> int:
        trace = self.load_trace(config)
        series = bin_trace(trace, config['analyze.tick_ms'] / 1e3)
        estimate = estimate_hurst(series, min_a=config['analyze.min_a'])

        csv_path = ReportFormatter.write_variance_time_csv(
            self.output_path(config, 'variance_time.csv'), estimate.points
        )
        json_path = self.report(config, {
            'trace': trace.label,
            'ticks': len(series),
            'H_hat': estimate.H_hat,
            'H_clamped': estimate.H_clamped,
            'beta_hat': estimate.beta_hat,
            'r_squared': estimate.r_squared,
            'levels': [p.a for p in estimate.points],
            'skipped_levels': estimate.skipped_levels,
        }, 'hurst.json', kind='hurst')

        print(ReportFormatter.format_hurst_report(estimate))
        print(ReportFormatter.format_success(f"Reports written to {csv_path} and {json_path}"))
        return EXIT_OK


def setup_analyze_command(subparsers: argparse._SubParsersAction) -> None:
    """
    Set up the analyze command.

    Args:
        subparsers: Sub-command registry of the main parser
    """
    analyze_cmd = AnalyzeCommand()

    parser = subparsers.add_parser('analyze', help="estimate the Hurst parameter of a trace")
    add_common_arguments(parser)
    parser.set_defaults(command=analyze_cmd)
