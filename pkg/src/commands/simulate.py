"""
Simulate command for eeesim.

Runs the selected link policies over one trace, writes a JSON result per
policy, the EEEP window records and predictor table, and compares the
simulated figures with the closed forms evaluated on the trace's own load.
"""

import argparse
import logging
from dataclasses import asdict
from typing import Dict, Optional

from .base import EXIT_OK, EXIT_OVERLOAD, BaseCommand, add_common_arguments
from ..config.experiment import ExperimentConfig
from ..engine.link_sim import SimResult, simulate_policy
from ..engine.theory import OverloadError, TheoryError, TheoryInputs, bounds_report
from ..engine.traffic_model import trace_stats
from ..utils.formatters import ReportFormatter

logger = logging.getLogger(__name__)

COMPARED_FIGURES = ('p_eee', 'e_eee', 'p_u', 'e_u', 'tg', 'eg')


def simulated_figures(eee: SimResult, eeep: Optional[SimResult]) -> Dict[str, float]:
    """
    Figures measured by simulation, named like the closed-form ones.

    Without an EEEP run the mixed strategy figures equal the EEE ones.
    """
    p_u = eeep.quiet_fraction_p if eeep else eee.quiet_fraction_p
    e_u = eeep.energy_J if eeep else eee.energy_J
    return {
        'p_eee': eee.quiet_fraction_p,
        'e_eee': eee.energy_J,
        'p_u': p_u,
        'e_u': e_u,
        'tg': (p_u - eee.quiet_fraction_p) / eee.quiet_fraction_p if eee.quiet_fraction_p else 0.0,
        'eg': (eee.energy_J - e_u) / eee.energy_J,
    }


class SimulateCommand(BaseCommand):
    """
    Command to simulate link policies on one trace.

    This command handles:
    - Trace loading or synthesis
    - Always-On, EEE and EEEP runs
    - Per-policy JSON results, window CSV and predictor table
    - Theory-vs-simulation deltas when EEE was simulated
    """

    async def execute(self, config: ExperimentConfig, args: argparse.Namespace) -> int:
        trace = self.load_trace(config)
        params = config.link_params()
        cfg = config.strategy_config()
        stats = trace_stats(trace, cfg.T_B)

        print(ReportFormatter.format_trace_summary(trace, stats))

        results: Dict[str, SimResult] = {}
        for policy in config.policies():
            result = simulate_policy(policy, trace, params, cfg)
            results[policy] = result

            body = result.to_dict()
            body['trace'] = trace.label
            self.report(config, body, f"result_{policy}.json", kind='sim_result')

            if policy == 'eeep':
                ReportFormatter.write_windows_csv(self.output_path(config, 'windows.csv'), result.windows)
                ReportFormatter.write_table_csv(self.output_path(config, 'predictor_table.csv'),
                                                result.table)

            print(ReportFormatter.format_sim_summary(result))

        if 'eee' in results:
            self.compare_with_theory(config, stats, params, cfg, trace.duration_L,
                                     results['eee'], results.get('eeep'))

        print(ReportFormatter.format_success(f"Reports written to {config.out_dir}"))
        if any(r.overflow for r in results.values()):
            return EXIT_OVERLOAD
        return EXIT_OK

    def compare_with_theory(self, config: ExperimentConfig, stats, params, cfg, duration: float,
                            eee: SimResult, eeep: Optional[SimResult]) -> None:
        """Write ``bounds.json`` with the closed forms on the measured load and the deltas."""
        inputs = TheoryInputs.from_trace_stats(
            stats, params, cfg,
            tau_bar=eeep.mean_tau if eeep else 0.0,
            U=eeep.U if eeep else 0.0,
            p_tau=cfg.prediction.p_tau,
            L=duration,
        )
        try:
            report = bounds_report(inputs)
        except (OverloadError, TheoryError) as e:
            self.logger.warning(f"Closed forms unavailable for this trace: {e}")
            return

        theory = report.to_dict()
        simulation = simulated_figures(eee, eeep)
        deltas = {k: simulation[k] - theory[k] for k in COMPARED_FIGURES}

        self.report(config, {
            'inputs': asdict(inputs),
            'theory': theory,
            'simulation': simulation,
            'deltas': deltas,
        }, 'bounds.json', kind='bounds')

        print(ReportFormatter.format_bounds(report))
        print(
            f"   Δ sim-theory: p_EEE {deltas['p_eee'] * 100:+.2f} pt, "
            f"E_EEE {deltas['e_eee']:+.2f} J, EG {deltas['eg'] * 100:+.2f} pt"
        )


def setup_simulate_command(subparsers: argparse._SubParsersAction) -> None:
    """
    Set up the simulate command.

    Args:
        subparsers: Sub-command registry of the main parser
    """
    simulate_cmd = SimulateCommand()

    parser = subparsers.add_parser('simulate', help="simulate link policies on a trace")
    add_common_arguments(parser)
    parser.set_defaults(command=simulate_cmd)
