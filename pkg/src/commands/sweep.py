"""
Sweep command for eeesim.

Evaluates the cross product of the configured ``sweep.<key>`` axes, either by
simulation or with the closed forms, and writes one CSV row per grid point
in grid order.
"""

import argparse
import asyncio
import concurrent.futures
import itertools
import logging
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from .base import EXIT_ERROR, EXIT_OK, EXIT_OVERLOAD, BaseCommand, add_common_arguments
from ..config.experiment import ExperimentConfig
from ..config.settings import settings
from ..engine.link_sim import simulate_policy
from ..engine.theory import BoundsReport, OverloadError, efficiencies, bounds_report
from ..engine.traffic_model import TraceFormatError
from ..utils.formatters import ReportFormatter
from ..utils.validators import ValidationError

logger = logging.getLogger(__name__)

SWEEP_MODES = ('sim', 'theory')

SIM_FIGURES = [
    'quiet_fraction_p',
    'energy_J',
    'U',
    'delayed_window_fraction',
    'mean_packet_delay',
    'max_packet_delay',
    'mean_tau',
    'overflow',
]
SIM_EXTRA_COLUMNS = ['non_delayed_fraction', 'eg_sim']
THEORY_COLUMNS = list(BoundsReport.__dataclass_fields__)
STATUS_COLUMNS = ['status', 'error']


def sweep_points(axes: Sequence[Tuple[str, List[str]]]) -> List[Dict[str, str]]:
    """Cross product of the axes, first axis varying slowest."""
    keys = [key for key, _ in axes]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(values for _, values in axes))]


def result_columns(mode: str, policies: Sequence[str]) -> List[str]:
    if mode == 'theory':
        return THEORY_COLUMNS
    columns = [f"{policy}_{figure}" for policy in policies for figure in SIM_FIGURES]
    return columns + SIM_EXTRA_COLUMNS


def _simulate_point(config: ExperimentConfig) -> Tuple[Dict[str, Any], str]:
    trace = BaseCommand.load_trace(config)
    params = config.link_params()
    cfg = config.strategy_config()

    row: Dict[str, Any] = {}
    results = {}
    for policy in config.policies():
        result = simulate_policy(policy, trace, params, cfg)
        results[policy] = result
        scalars = result.scalars()
        for figure in SIM_FIGURES:
            row[f"{policy}_{figure}"] = scalars[figure]

    if 'eeep' in results:
        eeep = results['eeep']
        row['non_delayed_fraction'] = 1.0 - eeep.delayed_window_fraction
        if 'eee' in results and results['eee'].energy_J > 0:
            row['eg_sim'] = (results['eee'].energy_J - eeep.energy_J) / results['eee'].energy_J

    status = 'overload' if any(r.overflow for r in results.values()) else 'ok'
    return row, status


def _theory_point(config: ExperimentConfig) -> Tuple[Dict[str, Any], str]:
    inputs = config.theory_inputs()
    eta_on, eta_eee, eta_eeep = efficiencies(inputs)
    row: Dict[str, Any] = {'eta_on': eta_on, 'eta_eee': eta_eee, 'eta_eeep': eta_eeep}
    try:
        row.update(bounds_report(inputs).to_dict())
    except OverloadError as e:
        # efficiency curves stay defined past the load limits
        row['error'] = str(e)
        return row, 'overload'
    return row, 'ok'


def _evaluate_point(mode: str, explicit: Mapping[str, str]) -> Dict[str, Any]:
    """
    Evaluate one grid point. Runs in a worker process.

    Failures are returned in the row so the sweep keeps going.
    """
    row: Dict[str, Any] = {}
    try:
        config = ExperimentConfig.resolve(explicit)
        if mode == 'theory':
            values, status = _theory_point(config)
        else:
            values, status = _simulate_point(config)
        row.update(values)
        row['status'] = status
    except OverloadError as e:
        row['status'] = 'overload'
        row['error'] = str(e)
    except (ValidationError, TraceFormatError, ValueError, ArithmeticError) as e:
        row['status'] = 'error'
        row['error'] = str(e)
    return row


class SweepCommand(BaseCommand):
    """
    Command to run a parameter sweep.

    Grid points run in a process pool sized by ``EEESIM_WORKERS``; rows are
    collected per point index and written in grid order.
    """

    async def execute(self, config: ExperimentConfig, args: argparse.Namespace) -> int:
        if not config.sweep_axes:
            raise ValidationError("sweep needs at least one sweep.<key>=<values> axis")

        mode = args.mode
        points = sweep_points(config.sweep_axes)
        base = {k: v for k, v in config.explicit.items() if not k.startswith('sweep.')}
        tasks = [{**base, **point} for point in points]

        workers = min(settings.WORKERS, len(tasks))
        self.logger.info(f"Sweeping {len(tasks)} points in {mode} mode with {workers} worker(s)")

        if workers <= 1:
            rows = [_evaluate_point(mode, task) for task in tasks]
        else:
            loop = asyncio.get_running_loop()
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
                rows = await asyncio.gather(
                    *(loop.run_in_executor(executor, _evaluate_point, mode, task) for task in tasks)
                )

        axis_keys = [key for key, _ in config.sweep_axes]
        columns = result_columns(mode, config.policies())
        header = axis_keys + columns + STATUS_COLUMNS
        table = [
            [point[k] for k in axis_keys] + [row.get(c, '') for c in columns + STATUS_COLUMNS]
            for point, row in zip(points, rows)
        ]
        path = ReportFormatter.write_csv(self.output_path(config, 'sweep.csv'), header, table)

        failed = sum(1 for row in rows if row['status'] == 'error')
        overloaded = sum(1 for row in rows if row['status'] == 'overload')
        for point, row in zip(points, rows):
            if row['status'] == 'error':
                self.logger.warning(f"Sweep point {point} failed: {row['error']}")

        print(ReportFormatter.format_success(
            f"{len(rows)} points written to {path} ({failed} failed, {overloaded} overloaded)"
        ))

        if failed:
            return EXIT_ERROR
        if overloaded:
            return EXIT_OVERLOAD
        return EXIT_OK


def setup_sweep_command(subparsers: argparse._SubParsersAction) -> None:
    """
    Set up the sweep command.

    Args:
        subparsers: Sub-command registry of the main parser
    """
    sweep_cmd = SweepCommand()

    parser = subparsers.add_parser('sweep', help="run a parameter sweep over sweep.<key> axes")
    add_common_arguments(parser)
    parser.add_argument('--mode', choices=SWEEP_MODES, default='sim',
                        help="simulate each point or evaluate the closed forms")
    parser.set_defaults(command=sweep_cmd)
