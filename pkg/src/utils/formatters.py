"""
Formatting utilities for console summaries and report files.

This module provides functions for consistently formatted console output
(trace summaries, Hurst reports, simulation results, closed-form bounds)
and for the JSON and CSV files every command writes.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .units import UnitParser


class ReportFormatter:
    """
    Creates console summaries and report files for eeesim commands.

    Files carry no timestamps so that identical runs give identical bytes.
    """

    ICON_SUCCESS = "✓"
    ICON_ERROR = "✗"
    ICON_WARNING = "⚠️"
    ICON_TRACE = "📦"
    ICON_ANALYSIS = "📈"
    ICON_LINK = "🔌"
    ICON_THEORY = "📐"

    @staticmethod
    def format_percent(value: Optional[float], digits: int = 2) -> str:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return "n/a"
        return f"{value * 100:.{digits}f}%"

    @staticmethod
    def format_trace_summary(trace, stats) -> str:
        """
        Summarize a trace for the console.

        Args:
            trace: TrafficTrace
            stats: TraceStats of the trace

        Returns:
            str: Multi-line summary
        """
        lines = [
            f"{ReportFormatter.ICON_TRACE} Trace {trace.label or '(unnamed)'}",
            f"   Duration:       {trace.duration_L:g} s at {trace.line_rate_f / 1e9:g} Gbit/s",
            f"   Packets:        {stats.n_packets}",
            f"   Total bits:     {stats.total_bits}",
            f"   Mean size d̄:    {stats.mean_size_bits:.1f} bits",
            f"   N̄ per T_B:      {stats.n_bar:.3f}",
            f"   Offered load:   {ReportFormatter.format_percent(stats.offered_load)}",
        ]
        return "\n".join(lines)

    @staticmethod
    def format_hurst_report(estimate) -> str:
        lines = [
            f"{ReportFormatter.ICON_ANALYSIS} Variance-time analysis",
            f"   Ĥ = {estimate.H_hat:.4f} (reported {estimate.H_clamped:.4f})",
            f"   β̂ = {estimate.beta_hat:.4f}",
            f"   R² = {estimate.r_squared:.4f} over {len(estimate.points)} levels",
        ]
        if estimate.skipped_levels:
            skipped = ', '.join(str(a) for a in estimate.skipped_levels)
            lines.append(f"   {ReportFormatter.ICON_WARNING} Zero-variance levels skipped: {skipped}")
        return "\n".join(lines)

    @staticmethod
    def format_sim_summary(result) -> str:
        """
        Summarize a SimResult for the console.

        Example:
            🔌 eee: quiet 70.41%, energy 48.683 J
        """
        line = (
            f"{ReportFormatter.ICON_LINK} {result.policy}: quiet "
            f"{ReportFormatter.format_percent(result.quiet_fraction_p)}, "
            f"energy {result.energy_J:.3f} J, max delay "
            f"{UnitParser.format_duration(UnitParser.seconds_to_ns(result.max_packet_delay))}"
        )
        if result.policy == 'eeep':
            line += (
                f", U {ReportFormatter.format_percent(result.U)}, "
                f"τ̄ {result.mean_tau * 1e3:.3f} ms, "
                f"delayed windows {ReportFormatter.format_percent(result.delayed_window_fraction)}"
            )
        if result.overflow:
            line += f" {ReportFormatter.ICON_WARNING} {result.overflow_units} overflowed unit(s)"
        return line

    @staticmethod
    def format_bounds(report) -> str:
        pct = ReportFormatter.format_percent
        lines = [
            f"{ReportFormatter.ICON_THEORY} Closed-form figures",
            f"   p_EEE {pct(report.p_eee)}, p_EEEP {pct(report.p_eeep)}, p_U {pct(report.p_u)}",
            f"   η_ON {pct(report.eta_on)}, η_EEE {pct(report.eta_eee)}, η_EEEP {pct(report.eta_eeep)}",
            f"   Load limits {report.n_limit_eee}/{report.n_limit_eeep}, "
            f"optimal loads {report.n_star_eee}/{report.n_star_eeep}",
            f"   Efficiency ceilings {pct(report.eta_bound_eee)}/{pct(report.eta_bound_eeep)}",
            f"   E_EEE {report.e_eee:.2f} J, E_U {report.e_u:.2f} J, TG {pct(report.tg)}, EG {pct(report.eg)}",
        ]
        return "\n".join(lines)

    @staticmethod
    def format_success(message: str) -> str:
        return f"{ReportFormatter.ICON_SUCCESS} {message}"

    @staticmethod
    def format_error(title: str, message: str) -> str:
        return f"{ReportFormatter.ICON_ERROR} {title}: {message}"

    @staticmethod
    def _jsonable(value: Any) -> Any:
        if isinstance(value, np.integer):
            return int(value)
        if isinstance(value, np.floating):
            return float(value)
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, Path):
            return str(value)
        raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")

    @staticmethod
    def write_json(path: Path, data: Dict[str, Any]) -> Path:
        """Write a JSON document with sorted keys."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(data, f, indent=2, sort_keys=True, default=ReportFormatter._jsonable)
            f.write('\n')
        return path

    @staticmethod
    def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow(['' if v is None else v for v in row])
        return path

    @staticmethod
    def write_variance_time_csv(path: Path, points) -> Path:
        """Variance-time points as ``a,log10_a,log10_var``."""
        return ReportFormatter.write_csv(
            path, ['a', 'log10_a', 'log10_var'],
            ((p.a, repr(p.log10_a), repr(p.log10_var)) for p in points),
        )

    @staticmethod
    def write_windows_csv(path: Path, windows) -> Path:
        """Per-window records as ``index,strategy,tau_s,delta_tau_s,carried_bits,H_hat``."""
        return ReportFormatter.write_csv(
            path, ['index', 'strategy', 'tau_s', 'delta_tau_s', 'carried_bits', 'H_hat'],
            ((w.index, w.strategy_used, repr(w.tau), repr(w.delta_tau), w.carried_over_bits,
              None if w.H_hat_at_decision is None else repr(w.H_hat_at_decision))
             for w in windows),
        )

    @staticmethod
    def write_table_csv(path: Path, table) -> Path:
        """Conditional probability table, one row per T1 level."""
        h = table.h
        header = ['l1'] + [f"p{j}" for j in range(1, h + 1)]
        rows: List[List[Any]] = []
        for i in range(h):
            rows.append([i + 1] + [repr(float(p)) for p in table.probs[i]])
        return ReportFormatter.write_csv(path, header, rows)
