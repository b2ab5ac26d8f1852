"""
Closed-form performance figures for the EEE and EEEP strategies.

All quantities are evaluated from a TheoryInputs record:
- quiet-time fractions p_EEE, p_EEEP and their U-weighted mix p_U
- efficiencies eta_ON, eta_EEE, eta_EEEP, eta_U
- load limits, efficiency-optimal loads and efficiency ceilings
- energies, time gain TG and energy gain EG

These serve as the oracle the simulator is checked against. N_bar is real
valued; flooring is applied only to load limits and optimal loads.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..utils.validators import InputValidator, ValidationError

logger = logging.getLogger(__name__)

REFERENCE_FILE = Path(__file__).resolve().parent.parent / 'data' / 'reference_traces.json'
DUAL_FORM_TOLERANCE = 1e-9


class OverloadError(Exception):
    """Raised when the offered load does not fit into a burst unit or window tail."""
    pass


class TheoryError(Exception):
    """Raised when a closed form is undefined or fails its own consistency check."""
    pass


@dataclass(frozen=True)
class TheoryInputs:
    """
    Parameters of the closed forms. Times in seconds, powers in watts.

    Attributes:
        N_bar: Mean packets per burst unit
        T_pack_bar: Mean serialization time of a packet
        tau_bar: Mean predicted tail length
        delta_tau_bar: Mean tail extension
        U: Fraction of windows using the predictive tail
        L: Observation length
    """
    N_bar: float
    T_pack_bar: float
    T: float = 0.100
    T_prime: float = 0.050
    T_B: float = 0.001
    T_trans: float = 0.0002185
    tau_bar: float = 0.0
    delta_tau_bar: float = 0.0
    U: float = 0.0
    pw_on: float = 0.697
    pw_off: float = 0.053
    L: float = 200.0

    def __post_init__(self):
        InputValidator.validate_non_negative("N_bar", self.N_bar)
        InputValidator.validate_positive("T_pack_bar", self.T_pack_bar)
        InputValidator.validate_positive("T", self.T)
        InputValidator.validate_positive("T_prime", self.T_prime)
        InputValidator.validate_positive("T_B", self.T_B)
        InputValidator.validate_non_negative("T_trans", self.T_trans)
        InputValidator.validate_non_negative("tau_bar", self.tau_bar)
        InputValidator.validate_non_negative("delta_tau_bar", self.delta_tau_bar)
        InputValidator.validate_range("U", self.U, 0.0, 1.0)
        InputValidator.validate_non_negative("pw_off", self.pw_off)
        InputValidator.validate_positive("L", self.L)
        if self.T_prime >= self.T:
            raise ValidationError(f"T_prime ({self.T_prime}) must be below T ({self.T})")
        if self.pw_on <= self.pw_off:
            raise ValidationError("pw_on must exceed pw_off")

    @property
    def kappa(self) -> float:
        return (self.T_prime + self.T_B) / self.T

    @property
    def p_tau(self) -> float:
        return self.delta_tau_bar / self.tau_bar if self.tau_bar > 0 else 0.0

    @property
    def K_win(self) -> int:
        return int(math.floor(self.L / self.T + 1e-9))

    @classmethod
    def from_trace_stats(cls, stats, params, cfg, tau_bar: float = 0.0,
                         U: float = 0.0, p_tau: float = 0.0,
                         L: Optional[float] = None) -> 'TheoryInputs':
        """
        Build inputs from measured trace figures and a link/strategy setup.

        Args:
            stats: TraceStats of the trace (N_bar, T_pack_bar)
            params: LinkParams
            cfg: StrategyConfig
            tau_bar: Mean tail length, e.g. measured by an EEEP run
            U: Fraction of EEEP windows, e.g. measured by an EEEP run
            p_tau: Tail extension fraction
            L: Observation length, defaults to 200 s
        """
        return cls(
            N_bar=stats.n_bar,
            T_pack_bar=stats.t_pack_bar if stats.t_pack_bar > 0 else 1.0 / params.line_rate_f,
            T=cfg.T,
            T_prime=cfg.T_prime,
            T_B=cfg.T_B,
            T_trans=params.T_trans,
            tau_bar=tau_bar,
            delta_tau_bar=p_tau * tau_bar,
            U=U,
            pw_on=params.pw_on,
            pw_off=params.pw_off,
            L=L if L is not None else 200.0,
        )


@dataclass
class BoundsReport:
    """Every closed-form figure for one set of inputs."""
    p_eee: float
    p_eeep: float
    p_u: float
    eta_on: float
    eta_eee: float
    eta_eeep: float
    eta_u: float
    n_limit_eee: int
    n_limit_eeep: int
    n_star_eee: int
    n_star_eeep: int
    eta_bound_eee: float
    eta_bound_eeep: float
    e_eee: float
    e_u: float
    e_on: float
    tg: float
    eg: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def p_eee_theory(inp: TheoryInputs) -> float:
    """
    Quiet fraction of EEE burst transmission: (T_B - T_trans - N*T_pack) / T_B.

    Raises:
        OverloadError: If the burst unit cannot hold the transitions and the load
    """
    slack = inp.T_B - inp.T_trans - inp.N_bar * inp.T_pack_bar
    if slack < 0:
        raise OverloadError(
            f"Load of {inp.N_bar:.2f} packets per burst unit exceeds the EEE budget"
        )
    return slack / inp.T_B


def p_eeep_theory(inp: TheoryInputs) -> float:
    """
    Quiet fraction of a window run entirely with the predictive strategy.

    EEE during T' (T'/T_B + 1 transitions in total), then Quiet for the rest
    of the window apart from the tail tau_bar + delta_tau_bar.

    Raises:
        OverloadError: If T' cannot hold its load or the tail exceeds T - T'
    """
    units_1 = inp.T_prime / inp.T_B
    busy = inp.N_bar * inp.T_pack_bar
    tail = inp.tau_bar + inp.delta_tau_bar

    if busy > inp.T_B:
        raise OverloadError(f"Load of {inp.N_bar:.2f} packets per burst unit exceeds T_B")
    if tail > inp.T - inp.T_prime + 1e-15:
        raise OverloadError(
            f"Tail {tail * 1e3:.3f} ms is longer than the prediction interval "
            f"{(inp.T - inp.T_prime) * 1e3:.3f} ms"
        )

    first = (inp.T_B - busy) * units_1 - inp.T_trans * (units_1 + 1)
    second = (inp.T - inp.T_prime) - tail
    p = (first + second) / inp.T
    if p < 0:
        raise OverloadError("EEEP quiet fraction is negative for these inputs")
    return p


def simplified_tau(inp: TheoryInputs) -> float:
    """Tail that exactly carries the mean T2 load: N * T_pack * (T - T') / T_B."""
    return inp.N_bar * inp.T_pack_bar * (inp.T - inp.T_prime) / inp.T_B


def efficiencies(inp: TheoryInputs) -> Tuple[float, float, float]:
    """
    Transmission time over active time for Always-On, EEE and EEEP.

    Returns:
        (eta_on, eta_eee, eta_eeep)
    """
    n = inp.N_bar
    c = inp.T_trans / inp.T_pack_bar

    eta_on = n * inp.T_pack_bar / inp.T_B
    eta_eee = n / (n + c) if n > 0 else 0.0
    eta_eeep = n / (n + c * inp.kappa) if n > 0 else 0.0
    return eta_on, eta_eee, eta_eeep


def load_limits_exact(inp: TheoryInputs) -> Tuple[float, float]:
    """Un-floored load limits, where Always-On reaches EEE and EEEP efficiency."""
    b = inp.T_B / inp.T_pack_bar
    c = inp.T_trans / inp.T_pack_bar
    return b - c, b - c * inp.kappa


def load_limits(inp: TheoryInputs) -> Tuple[int, int]:
    """
    Maximum packets per burst unit for EEE and EEEP.

    Example:
        T_pack = 5.68 us with default timings -> (137, 156)
    """
    eee, eeep = load_limits_exact(inp)
    return int(math.floor(eee)), int(math.floor(eeep))


def optimal_loads(inp: TheoryInputs) -> Tuple[int, int]:
    """
    Loads maximising the efficiency gain over Always-On, for EEE and EEEP.

    Raises:
        TheoryError: If T_B does not exceed T_trans
    """
    if inp.T_B <= inp.T_trans:
        raise TheoryError("T_B must exceed T_trans")

    b = math.sqrt(inp.T_B / inp.T_pack_bar)
    c_eee = math.sqrt(inp.T_trans / inp.T_pack_bar)
    c_eeep = math.sqrt(inp.T_trans / inp.T_pack_bar * inp.kappa)
    return int(math.floor(c_eee * (b - c_eee))), int(math.floor(c_eeep * (b - c_eeep)))


def efficiency_bounds(inp: TheoryInputs) -> Tuple[float, float]:
    """Efficiency ceilings: 1 - T_trans/T_B and 1 - kappa*T_trans/T_B."""
    ratio = inp.T_trans / inp.T_B
    return 1.0 - ratio, 1.0 - ratio * inp.kappa


def mix_u(p_eee: float, p_eeep: float, eta_eee: float, eta_eeep: float,
          U: float) -> Tuple[float, float]:
    """Convex mix by the fraction U of predictive windows: (p_u, eta_u)."""
    U = InputValidator.validate_range("U", U, 0.0, 1.0)
    return U * p_eeep + (1.0 - U) * p_eee, U * eta_eeep + (1.0 - U) * eta_eee


def energy_from_quiet_fraction(p: float, inp: TheoryInputs) -> float:
    """
    Energy over L seconds for quiet fraction p: L * (p*pw_off + (1-p)*pw_on).

    Example:
        p = 0 over 200 s at 0.697 W -> 139.4 J
    """
    p = InputValidator.validate_range("p", p, 0.0, 1.0)
    return inp.L * (p * inp.pw_off + (1.0 - p) * inp.pw_on)


def time_gain(p_eee: float, p_eeep: float, U: float) -> float:
    """
    Relative increase of quiet time over EEE: U * (p_eeep - p_eee) / p_eee.

    Raises:
        TheoryError: If p_eee is zero
    """
    if p_eee == 0:
        raise TheoryError("Time gain is undefined for p_EEE = 0")
    return U * (p_eeep - p_eee) / p_eee


def _power_ratio_denominator(inp: TheoryInputs, p_eee: float) -> float:
    denominator = inp.pw_on / (inp.pw_on - inp.pw_off) - p_eee
    if abs(denominator) < 1e-15:
        raise TheoryError("Energy gain denominator is zero")
    return denominator


def energy_gain_components(inp: TheoryInputs) -> Dict[str, float]:
    """Intermediate terms of the energy gain: X, the tau terms and the denominator."""
    units_2 = (inp.T - inp.T_prime) / inp.T_B
    x = (inp.T_trans / inp.T) * (units_2 - 1.0) + (inp.N_bar * inp.T_pack_bar / inp.T) * units_2
    p_eee = p_eee_theory(inp)
    return {
        'X': x,
        'tau_term': inp.tau_bar / inp.T,
        'delta_tau_term': inp.delta_tau_bar / inp.T,
        'denominator': _power_ratio_denominator(inp, p_eee),
    }


def energy_gain_from_energies(inp: TheoryInputs) -> float:
    """Energy gain as (E_EEE - E_U) / E_EEE."""
    p_eee = p_eee_theory(inp)
    p_u, _ = mix_u(p_eee, p_eeep_theory(inp), 0.0, 0.0, inp.U)
    e_eee = energy_from_quiet_fraction(p_eee, inp)
    return (e_eee - energy_from_quiet_fraction(p_u, inp)) / e_eee


def energy_gain(inp: TheoryInputs) -> float:
    """
    Relative energy saving of the mixed strategy over EEE.

    EG = U * (X - tau/T - delta_tau/T) / (pw_on/(pw_on - pw_off) - p_eee)

    The value is cross-checked against (E_EEE - E_U) / E_EEE.

    Raises:
        TheoryError: On a zero denominator or if the two forms disagree
        OverloadError: Propagated from the quiet-fraction forms
    """
    parts = energy_gain_components(inp)
    eg = inp.U * (parts['X'] - parts['tau_term'] - parts['delta_tau_term']) / parts['denominator']

    dual = energy_gain_from_energies(inp)
    if abs(eg - dual) > DUAL_FORM_TOLERANCE:
        raise TheoryError(f"Energy gain forms disagree: {eg!r} vs {dual!r}")
    return eg


def eg_vs_ptau_sweep(inp: TheoryInputs, p_tau_values: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Energy gain for each tail extension fraction p_tau.

    Raises:
        TheoryError: If successive differences are not constant (uniform grids only)
    """
    rows = []
    for p_tau in p_tau_values:
        p_tau = InputValidator.validate_non_negative("p_tau", p_tau)
        point = replace(inp, delta_tau_bar=p_tau * inp.tau_bar)
        rows.append((p_tau, energy_gain(point)))

    steps = [b[0] - a[0] for a, b in zip(rows, rows[1:])]
    if len(rows) > 2 and max(steps) - min(steps) < 1e-12:
        diffs = [b[1] - a[1] for a, b in zip(rows, rows[1:])]
        if max(diffs) - min(diffs) > DUAL_FORM_TOLERANCE:
            raise TheoryError("Energy gain is not linear in p_tau")

    return rows


def efficiency_curves(inp: TheoryInputs, n_values: Sequence[float]) -> List[Dict[str, float]]:
    """Efficiencies over a scan of N_bar, one row per value."""
    rows = []
    for n in n_values:
        eta_on, eta_eee, eta_eeep = efficiencies(replace(inp, N_bar=float(n)))
        rows.append({'n_bar': float(n), 'eta_on': eta_on, 'eta_eee': eta_eee, 'eta_eeep': eta_eeep})
    return rows


def back_derive_n_bar(p_eee: float, T_pack_bar: float, T_B: float = 0.001,
                      T_trans: float = 0.0002185) -> float:
    """
    Mean packets per burst unit that yield a given EEE quiet fraction.

    Example:
        p_eee = 0.706 with T_pack = 5.68 us -> about 13.29 packets
    """
    InputValidator.validate_range("p_eee", p_eee, 0.0, 1.0)
    InputValidator.validate_positive("T_pack_bar", T_pack_bar)
    return (T_B * (1.0 - p_eee) - T_trans) / T_pack_bar


def bounds_report(inp: TheoryInputs) -> BoundsReport:
    """
    Evaluate every closed form for one set of inputs.

    Raises:
        OverloadError: If either quiet fraction is infeasible
        TheoryError: If the energy gain is undefined
    """
    p_eee = p_eee_theory(inp)
    p_eeep = p_eeep_theory(inp)
    eta_on, eta_eee, eta_eeep = efficiencies(inp)
    p_u, eta_u = mix_u(p_eee, p_eeep, eta_eee, eta_eeep, inp.U)
    n_limit_eee, n_limit_eeep = load_limits(inp)
    n_star_eee, n_star_eeep = optimal_loads(inp)
    bound_eee, bound_eeep = efficiency_bounds(inp)

    report = BoundsReport(
        p_eee=p_eee,
        p_eeep=p_eeep,
        p_u=p_u,
        eta_on=eta_on,
        eta_eee=eta_eee,
        eta_eeep=eta_eeep,
        eta_u=eta_u,
        n_limit_eee=n_limit_eee,
        n_limit_eeep=n_limit_eeep,
        n_star_eee=n_star_eee,
        n_star_eeep=n_star_eeep,
        eta_bound_eee=bound_eee,
        eta_bound_eeep=bound_eeep,
        e_eee=energy_from_quiet_fraction(p_eee, inp),
        e_u=energy_from_quiet_fraction(p_u, inp),
        e_on=energy_from_quiet_fraction(0.0, inp),
        tg=time_gain(p_eee, p_eeep, inp.U) if p_eee > 0 else 0.0,
        eg=energy_gain(inp),
    )
    logger.debug(f"Bounds: p_EEE={p_eee:.4f}, p_EEEP={p_eeep:.4f}, EG={report.eg:.4f}")
    return report


@dataclass(frozen=True)
class ReferenceTrace:
    """Reference figures of one measured trace, closed-form and simulated."""
    id: str
    hurst: float
    d_bar_bits: int
    U: float
    theory: Dict[str, float]
    simulation: Dict[str, float]


def load_reference_traces(path: Optional[Path] = None) -> Dict[str, object]:
    """
    Load the reference-trace fixture.

    Returns:
        Dict with the global timings, ``traces`` (ReferenceTrace by id) and
        ``p_tau_sweep`` rows
    """
    with open(path or REFERENCE_FILE, 'r', encoding='utf-8') as f:
        data = json.load(f)

    data['traces'] = {t['id']: ReferenceTrace(**t) for t in data['traces']}
    return data


def reference_inputs(ref: ReferenceTrace, fixture: Dict[str, object],
                     tau_source: str = 'theory', p_tau: float = 0.0) -> TheoryInputs:
    """
    Theory inputs for a reference trace, with N_bar back-derived from its p_EEE.

    Args:
        ref: Reference trace
        fixture: Loaded fixture (global timings)
        tau_source: 'theory' or 'simulation' column for tau_bar
        p_tau: Tail extension fraction
    """
    InputValidator.validate_choice("tau source", tau_source, ('theory', 'simulation'))
    T_B = fixture['T_B_ms'] / 1e3
    T_pack = ref.d_bar_bits / fixture['line_rate_bps']
    T_trans = (fixture['t_s_ms'] + fixture['t_w_ms']) / 1e3
    tau = getattr(ref, tau_source)['tau_ms'] / 1e3

    return TheoryInputs(
        N_bar=back_derive_n_bar(ref.theory['p_eee'], T_pack, T_B, T_trans),
        T_pack_bar=T_pack,
        T=fixture['T_ms'] / 1e3,
        T_prime=fixture['T_prime_ms'] / 1e3,
        T_B=T_B,
        T_trans=T_trans,
        tau_bar=tau,
        delta_tau_bar=p_tau * tau,
        U=ref.U,
        pw_on=fixture['pw_on_w'],
        pw_off=fixture['pw_off_w'],
        L=fixture['L_s'],
    )
