"""
Link simulation for eeesim.

Simulates one egress link under three policies:
- Always-On: the link never leaves the Active state
- EEE burst transmission: packets are collected for a burst unit T_B and
  sent together at the next unit boundary, the link sleeps in between
- EEEP: EEE during the first part T' of every window of length T, then,
  when the predictor is confident and traffic is self-similar, the link
  sleeps until T - (tau + delta_tau) and sends the second part in one tail

Time is kept in integer nanoseconds. Burst unit k spans [k*T_B, (k+1)*T_B)
and holds, in order, the transmission of the previous unit's queue, the
sleep transition, the Quiet period and the wake transition that ends on the
next boundary.
"""

import bisect
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..utils.units import UnitParser
from ..utils.validators import InputValidator, ValidationError
from .predictor import CondProbTable, PredictionConfig, TrafficPredictor, compute_tau
from .selfsimilarity import DegenerateSeriesError, estimate_hurst
from .traffic_model import LoadSeries, TrafficTrace, bin_trace

logger = logging.getLogger(__name__)


class TransitionError(Exception):
    """Raised on an illegal link-state transition."""
    pass


class SimulationError(Exception):
    """Raised when the simulator's own accounting is violated."""
    pass


class LinkState(Enum):
    ACTIVE = 'Active'
    GOING_TO_SLEEP = 'GoingToSleep'
    QUIET = 'Quiet'
    WAKING = 'Waking'
    REFRESH = 'Refresh'


class LinkEvent(Enum):
    SLEEP_REQUEST = 'sleep_request'
    SLEEP_DONE = 'sleep_done'
    WAKE_REQUEST = 'wake_request'
    WAKE_DONE = 'wake_done'
    REFRESH_START = 'refresh_start'
    REFRESH_END = 'refresh_end'


TRANSITIONS: Dict[Tuple[LinkState, LinkEvent], LinkState] = {
    (LinkState.ACTIVE, LinkEvent.SLEEP_REQUEST): LinkState.GOING_TO_SLEEP,
    (LinkState.GOING_TO_SLEEP, LinkEvent.SLEEP_DONE): LinkState.QUIET,
    (LinkState.QUIET, LinkEvent.WAKE_REQUEST): LinkState.WAKING,
    (LinkState.QUIET, LinkEvent.REFRESH_START): LinkState.REFRESH,
    (LinkState.REFRESH, LinkEvent.REFRESH_END): LinkState.QUIET,
    (LinkState.WAKING, LinkEvent.WAKE_DONE): LinkState.ACTIVE,
}

POLICIES = ('on', 'eee', 'eeep')


@dataclass
class LinkParams:
    """
    Physical link parameters. Times are in seconds, powers in watts.

    Defaults are the 1000BASE-T worst-case timings and powers.
    """
    line_rate_f: int = 1_000_000_000
    t_s: float = 0.000202
    t_w: float = 0.0000165
    t_r: float = 0.0002
    refresh_period: float = 0.020
    pw_on: float = 0.697
    pw_off: float = 0.053

    def validate(self) -> None:
        self.line_rate_f = int(InputValidator.validate_positive("link.line_rate_bps", self.line_rate_f))
        InputValidator.validate_non_negative("link.t_s", self.t_s)
        InputValidator.validate_non_negative("link.t_w", self.t_w)
        InputValidator.validate_non_negative("link.t_r", self.t_r)
        InputValidator.validate_positive("link.refresh_period", self.refresh_period)
        InputValidator.validate_non_negative("link.pw_off", self.pw_off)
        if self.pw_on <= self.pw_off:
            raise ValidationError(
                f"link.pw_on ({self.pw_on} W) must exceed link.pw_off ({self.pw_off} W)"
            )

    @property
    def T_trans(self) -> float:
        return self.t_s + self.t_w


@dataclass
class StrategyConfig:
    """
    Policy knobs: window T, learning part T', burst unit T_B (seconds).

    ``model_faithful_eee`` makes every burst unit pay a sleep/wake cycle even
    when nothing was queued; otherwise empty units stay Quiet.
    """
    T: float = 0.100
    T_prime: float = 0.050
    T_B: float = 0.001
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    model_faithful_eee: bool = True
    refresh_enabled: bool = False

    def validate(self, params: LinkParams) -> None:
        T_B_ns = UnitParser.seconds_to_ns(InputValidator.validate_positive("strategy.T_B", self.T_B))
        T_ns = UnitParser.seconds_to_ns(InputValidator.validate_positive("strategy.T", self.T))
        T1_ns = UnitParser.seconds_to_ns(InputValidator.validate_positive("strategy.T_prime", self.T_prime))

        InputValidator.validate_multiple_of("strategy.T", T_ns, "T_B", T_B_ns)
        InputValidator.validate_multiple_of("strategy.T_prime", T1_ns, "T_B", T_B_ns)
        if T1_ns >= T_ns:
            raise ValidationError(f"strategy.T_prime ({self.T_prime} s) must be below strategy.T ({self.T} s)")

        trans_ns = UnitParser.seconds_to_ns(params.t_s) + UnitParser.seconds_to_ns(params.t_w)
        if T_B_ns <= trans_ns:
            raise ValidationError(
                f"strategy.T_B ({self.T_B} s) must exceed the transition time {params.T_trans} s"
            )
        self.prediction.validate()


@dataclass
class WindowRecord:
    """Outcome of one window of length T under EEEP."""
    index: int
    strategy_used: str
    tau: float
    delta_tau: float
    carried_over_bits: int
    H_hat_at_decision: Optional[float]
    v1_bits: int = 0
    v2_bits: int = 0
    predicted_bits: Optional[float] = None
    delayed: bool = False


@dataclass
class PacketRecord:
    """Arrival, transmission start and transmission end of one packet (ns)."""
    arrival_ns: int
    start_ns: int
    end_ns: int

    @property
    def delay_ns(self) -> int:
        return self.end_ns - self.arrival_ns


@dataclass
class SimResult:
    """
    Figures of one simulation run.

    Delays and tau are in seconds, residencies in nanoseconds.
    """
    policy: str
    duration_L: float
    quiet_fraction_p: float
    energy_J: float
    total_bits: int
    transmitted_bits: int
    queued_bits: int
    U: float = 0.0
    delayed_window_fraction: float = 0.0
    max_packet_delay: float = 0.0
    mean_packet_delay: float = 0.0
    mean_tau: float = 0.0
    overflow: bool = False
    overflow_units: int = 0
    residency_ns: Dict[str, int] = field(default_factory=dict)
    windows: List[WindowRecord] = field(default_factory=list)
    packet_log: Optional[List[PacketRecord]] = None
    table: Optional[CondProbTable] = None

    def scalars(self) -> Dict[str, object]:
        """Scalar outcome figures, comparable across policies."""
        return {
            'quiet_fraction_p': self.quiet_fraction_p,
            'energy_J': self.energy_J,
            'total_bits': self.total_bits,
            'transmitted_bits': self.transmitted_bits,
            'queued_bits': self.queued_bits,
            'U': self.U,
            'delayed_window_fraction': self.delayed_window_fraction,
            'max_packet_delay': self.max_packet_delay,
            'mean_packet_delay': self.mean_packet_delay,
            'mean_tau': self.mean_tau,
            'overflow': self.overflow,
            'overflow_units': self.overflow_units,
        }

    def to_dict(self) -> Dict[str, object]:
        data = {'policy': self.policy, 'duration_L': self.duration_L}
        data.update(self.scalars())
        data['residency_ns'] = dict(self.residency_ns)
        data['windows'] = len(self.windows)
        return data

    def window_dicts(self) -> List[Dict[str, object]]:
        return [asdict(w) for w in self.windows]


def advance_state(state: LinkState, event: LinkEvent) -> LinkState:
    """
    Apply one event to the link state machine.

    Raises:
        TransitionError: If the event is not legal in ``state``

    Example:
        >>> advance_state(LinkState.QUIET, LinkEvent.WAKE_REQUEST)
        <LinkState.WAKING: 'Waking'>
    """
    try:
        return TRANSITIONS[(state, event)]
    except KeyError:
        raise TransitionError(f"Illegal transition: {event.value} in state {state.value}")


def energy_accumulate(residency: Mapping[LinkState, float], params: LinkParams) -> float:
    """
    Energy in joules: Quiet at pw_off, every other state (transitions included) at pw_on.

    Args:
        residency: Seconds spent per state
        params: Link parameters with the two power levels
    """
    quiet = 0.0
    other = 0.0
    for state, seconds in residency.items():
        InputValidator.validate_non_negative(f"residency[{LinkState(state).value}]", seconds)
        if LinkState(state) is LinkState.QUIET:
            quiet += seconds
        else:
            other += seconds
    return params.pw_off * quiet + params.pw_on * other


class _Timeline:
    """State machine clock with per-state residency, clamped to the horizon."""

    def __init__(self, horizon_ns: int, state: LinkState, params: LinkParams,
                 refresh_enabled: bool):
        self.horizon = horizon_ns
        self.clock = 0
        self.state = state
        self.residency = {s: 0 for s in LinkState}
        self.t_s = UnitParser.seconds_to_ns(params.t_s)
        self.t_w = UnitParser.seconds_to_ns(params.t_w)
        self.t_r = UnitParser.seconds_to_ns(params.t_r)
        self.refresh_period = UnitParser.seconds_to_ns(params.refresh_period)
        self.refresh_enabled = refresh_enabled and self.t_r > 0

    def hold(self, until: int) -> None:
        until = min(until, self.horizon)
        if until > self.clock:
            self.residency[self.state] += until - self.clock
            self.clock = until

    def fire(self, event: LinkEvent) -> None:
        self.state = advance_state(self.state, event)

    def sleep(self) -> None:
        self.fire(LinkEvent.SLEEP_REQUEST)
        self.hold(self.clock + self.t_s)
        self.fire(LinkEvent.SLEEP_DONE)

    def quiet_until(self, until: int) -> None:
        until = min(until, self.horizon)
        if self.refresh_enabled:
            while self.clock + self.refresh_period + self.t_r <= until:
                self.hold(self.clock + self.refresh_period)
                self.fire(LinkEvent.REFRESH_START)
                self.hold(self.clock + self.t_r)
                self.fire(LinkEvent.REFRESH_END)
        self.hold(until)

    def wake(self) -> None:
        self.fire(LinkEvent.WAKE_REQUEST)
        self.hold(self.clock + self.t_w)
        self.fire(LinkEvent.WAKE_DONE)


class _PacketQueue:
    """FIFO over the trace; ``head`` is the first packet not yet sent."""

    def __init__(self, trace: TrafficTrace, horizon_ns: int, record_packets: bool):
        self.arrivals: List[int] = trace.arrival_ns.tolist()
        service = UnitParser.serialization_ns(trace.size_bits, trace.line_rate_f)
        self.service: List[int] = service.tolist()
        self.bits_before = np.concatenate(([0], np.cumsum(trace.size_bits))).tolist()
        self.horizon = horizon_ns
        self.head = 0
        self.delay_max = 0
        self.delay_sum = 0
        self.log: Optional[List[PacketRecord]] = [] if record_packets else None

    def count_before(self, t: int) -> int:
        return bisect.bisect_left(self.arrivals, t)

    def bits_between(self, first: int, last: int) -> int:
        return self.bits_before[last] - self.bits_before[first]

    @property
    def sent_bits(self) -> int:
        return self.bits_before[self.head]

    def serve(self, clock: int, end: int, cutoff: int) -> int:
        """
        Send packets [head, cutoff) in order, starting at ``clock``.

        A packet starts at max(clock, arrival) and only if it finishes by
        ``end``. Returns the time the last sent packet finished.
        """
        end = min(end, self.horizon)
        arrivals, service = self.arrivals, self.service
        head = self.head
        while head < cutoff:
            start = arrivals[head] if arrivals[head] > clock else clock
            finish = start + service[head]
            if finish > end:
                break
            delay = finish - arrivals[head]
            if delay > self.delay_max:
                self.delay_max = delay
            self.delay_sum += delay
            if self.log is not None:
                self.log.append(PacketRecord(arrivals[head], start, finish))
            clock = finish
            head += 1
        self.head = head
        return clock


class _LinkRun:
    """State of one simulation run shared by the three policies."""

    def __init__(self, trace: TrafficTrace, params: LinkParams, cfg: Optional[StrategyConfig],
                 initial: LinkState, record_packets: bool):
        if trace.line_rate_f != params.line_rate_f:
            logger.warning(
                f"Trace line rate {trace.line_rate_f} bit/s differs from link rate "
                f"{params.line_rate_f} bit/s; using the link rate"
            )
            trace = TrafficTrace(trace.arrival_ns, trace.size_bits, trace.duration_L,
                                 params.line_rate_f, trace.label)

        self.trace = trace
        self.params = params
        self.cfg = cfg
        self.horizon = trace.duration_ns
        self.timeline = _Timeline(self.horizon, initial, params,
                                  bool(cfg and cfg.refresh_enabled))
        self.queue = _PacketQueue(trace, self.horizon, record_packets)
        self.overflow_units = 0

        if cfg is not None:
            self.T_B = UnitParser.seconds_to_ns(cfg.T_B)
            self.faithful = cfg.model_faithful_eee
            self.t_trans = self.timeline.t_s + self.timeline.t_w

    def eee_unit(self, k: int) -> None:
        """Run burst unit k: send the queue, sleep, stay Quiet, wake for the next boundary."""
        tl, q = self.timeline, self.queue
        b = k * self.T_B
        e = b + self.T_B
        cutoff = q.count_before(b)

        if tl.state is LinkState.ACTIVE:
            finish = q.serve(b, e - self.t_trans, cutoff)
            if q.head < cutoff:
                q.serve(finish, e, cutoff)
                tl.hold(e)
                self.overflow_units += 1
                return
            tl.hold(finish)
            tl.sleep()

        if self.faithful or q.count_before(e) > q.head:
            tl.quiet_until(e - tl.t_w)
            tl.wake()
        else:
            tl.quiet_until(e)

    def finish(self, policy: str, **extra) -> SimResult:
        tl, q = self.timeline, self.queue
        tl.hold(self.horizon)

        if sum(tl.residency.values()) != self.horizon:
            raise SimulationError("State residencies do not add up to the trace duration")

        total_bits = self.trace.total_bits
        sent = q.sent_bits
        residency_s = {s: UnitParser.ns_to_seconds(ns) for s, ns in tl.residency.items()}

        result = SimResult(
            policy=policy,
            duration_L=self.trace.duration_L,
            quiet_fraction_p=tl.residency[LinkState.QUIET] / self.horizon,
            energy_J=energy_accumulate(residency_s, self.params),
            total_bits=total_bits,
            transmitted_bits=sent,
            queued_bits=total_bits - sent,
            max_packet_delay=UnitParser.ns_to_seconds(q.delay_max),
            mean_packet_delay=UnitParser.ns_to_seconds(q.delay_sum / q.head) if q.head else 0.0,
            overflow=self.overflow_units > 0,
            overflow_units=self.overflow_units,
            residency_ns={s.value: ns for s, ns in tl.residency.items()},
            packet_log=q.log,
            **extra,
        )

        if result.overflow:
            logger.warning(f"{policy}: {self.overflow_units} burst unit(s) overflowed")
        logger.info(
            f"{policy}: quiet {result.quiet_fraction_p:.4f}, energy {result.energy_J:.3f} J, "
            f"{result.transmitted_bits}/{result.total_bits} bits sent"
        )
        return result


def run_always_on(trace: TrafficTrace, params: LinkParams,
                  record_packets: bool = False) -> SimResult:
    """
    Simulate a link that stays Active for the whole trace.

    Packets are sent FIFO at line rate; delay is queueing plus serialization.
    """
    params.validate()
    run = _LinkRun(trace, params, None, LinkState.ACTIVE, record_packets)
    run.queue.serve(0, run.horizon, len(run.queue.arrivals))
    return run.finish('on')


def run_eee_burst(trace: TrafficTrace, params: LinkParams, cfg: StrategyConfig,
                  record_packets: bool = False) -> SimResult:
    """
    Simulate EEE with burst transmission.

    Packets arriving in unit k are sent at the start of unit k+1, after
    which the link sleeps until the wake transition that ends on the next
    boundary. With ``model_faithful_eee`` the cycle runs every unit; without
    it a unit with nothing queued stays Quiet. A queue that cannot be sent
    before the unit's sleep deadline keeps the link Active for the whole
    unit and is flagged as overflow.

    Args:
        trace: Packet arrivals
        params: Link timings and powers
        cfg: Strategy configuration (T_B and the EEE mode are used)
        record_packets: Keep a per-packet (arrival, start, end) log

    Returns:
        SimResult: Quiet fraction, energy, delays and overflow figures
    """
    params.validate()
    cfg.validate(params)

    initial = LinkState.ACTIVE if cfg.model_faithful_eee else LinkState.QUIET
    run = _LinkRun(trace, params, cfg, initial, record_packets)
    n_units = -(-run.horizon // run.T_B)

    for k in range(n_units):
        run.eee_unit(k)

    return run.finish('eee')


class _EeepRun(_LinkRun):
    """EEEP orchestration on top of the burst-unit machinery."""

    def __init__(self, trace: TrafficTrace, params: LinkParams, cfg: StrategyConfig,
                 record_packets: bool):
        initial = LinkState.ACTIVE if cfg.model_faithful_eee else LinkState.QUIET
        super().__init__(trace, params, cfg, initial, record_packets)

        self.pcfg = cfg.prediction
        self.predictor = TrafficPredictor(config=self.pcfg)
        self.T = UnitParser.seconds_to_ns(cfg.T)
        self.T1 = UnitParser.seconds_to_ns(cfg.T_prime)
        self.W = self.T // self.T_B
        self.W1 = self.T1 // self.T_B
        self.n_windows = self.horizon // self.T

        self.setup = True
        self.H_eff: Optional[float] = self.pcfg.hurst_override
        self.windows_since_estimate = 0
        self.load: Optional[LoadSeries] = None
        self.records: List[WindowRecord] = []
        self.sent_at_window_start = 0

    def refresh_hurst(self, upto_ns: int) -> None:
        """Re-estimate H from the per-unit load seen up to ``upto_ns``."""
        if self.pcfg.hurst_override is not None:
            return
        if self.load is None:
            self.load = bin_trace(self.trace, self.cfg.T_B)

        seen = LoadSeries(tick=self.load.tick, values=self.load.values[:upto_ns // self.T_B])
        try:
            estimate = estimate_hurst(seen)
        except DegenerateSeriesError as e:
            logger.debug(f"Hurst estimate unavailable at {upto_ns} ns: {e}")
            self.H_eff = None
        else:
            self.H_eff = estimate.H_clamped if math.isfinite(estimate.H_hat) else None
        self.windows_since_estimate = 0

    def decide(self, i: int) -> Dict[str, object]:
        """Evaluate the prediction gate at T' of window i."""
        q = self.queue
        start = i * self.T
        mid = start + self.T1

        v1 = q.bits_between(q.count_before(start), q.count_before(mid))
        measured = q.bits_between(0, q.count_before(mid)) - self.sent_at_window_start

        level, expected = self.predictor.predict(v1)
        if expected is None:
            tau = delta_tau = 0.0
        else:
            tau, delta_tau = compute_tau(expected, self.params.line_rate_f, self.pcfg.p_tau)

        gate = (expected is not None and expected <= measured
                and self.H_eff is not None and self.H_eff > self.pcfg.H_bar)

        logger.debug(
            f"window {i}: level {level}, expected {expected}, measured {measured}, "
            f"H {self.H_eff}, tail {'on' if gate else 'off'}"
        )
        return {'gate': gate, 'tau': tau, 'delta_tau': delta_tau, 'expected': expected}

    def eeep_tail(self, i: int, tau: float, delta_tau: float) -> None:
        """Run T2 of window i as Quiet followed by one Active tail."""
        tl, q = self.timeline, self.queue
        b = i * self.T + self.T1
        e = (i + 1) * self.T

        tail_len = min(int(math.ceil(UnitParser.NS_PER_SECOND * (tau + delta_tau))), e - b)
        wake_start = e - tail_len - tl.t_w

        if tl.state is LinkState.ACTIVE:
            sent_until = q.serve(b, e, q.count_before(b))
            if sent_until + tl.t_s > wake_start:
                # no room to sleep before the tail: stay Active to the window end
                q.serve(sent_until, e, q.count_before(e))
                tl.hold(e)
                return
            tl.hold(sent_until)
            tl.sleep()

        # realistic mode only wakes for bits queued or arriving before e
        if self.faithful or q.count_before(e) > q.head:
            tl.quiet_until(max(wake_start, tl.clock))
            tl.wake()
            q.serve(tl.clock, e, q.count_before(e))
            tl.hold(e)
        else:
            tl.quiet_until(e)

    def close_window(self, i: int, decision: Optional[Dict[str, object]]) -> None:
        q = self.queue
        start = i * self.T
        mid = start + self.T1
        end = start + self.T

        first, middle, last = q.count_before(start), q.count_before(mid), q.count_before(end)
        v1 = q.bits_between(first, middle)
        v2 = q.bits_between(middle, last)
        carried = q.bits_between(q.head, last) if q.head < last else 0

        if decision is None:
            record = WindowRecord(i, 'EEE', 0.0, 0.0, carried, None, v1, v2)
        else:
            strategy = 'EEEP' if decision['gate'] else 'EEE'
            record = WindowRecord(i, strategy, decision['tau'], decision['delta_tau'], carried,
                                  self.H_eff, v1, v2, decision['expected'],
                                  delayed=bool(decision['gate'] and carried > 0))
        self.records.append(record)

        self.predictor.observe(v1, v2)
        self.windows_since_estimate += 1
        if self.setup:
            if self.predictor.converged():
                self.setup = False
                logger.debug(f"Predictor converged after {i + 1} windows")
                self.refresh_hurst(end)
        elif self.windows_since_estimate >= self.pcfg.hurst_recheck_windows:
            self.refresh_hurst(end)

    def run(self) -> SimResult:
        n_units = -(-self.horizon // self.T_B)
        decision: Optional[Dict[str, object]] = None
        k = 0

        while k < n_units:
            i, pos = divmod(k, self.W)
            if pos == 0:
                self.sent_at_window_start = self.queue.sent_bits
                decision = None

            if pos == self.W1 and i < self.n_windows and not self.setup:
                decision = self.decide(i)
                if decision['gate']:
                    self.eeep_tail(i, decision['tau'], decision['delta_tau'])
                    k = (i + 1) * self.W
                else:
                    self.eee_unit(k)
                    k += 1
            else:
                self.eee_unit(k)
                k += 1

            if k % self.W == 0 and i < self.n_windows:
                self.close_window(i, decision)

        eeep = [w for w in self.records if w.strategy_used == 'EEEP']
        return self.finish(
            'eeep',
            U=len(eeep) / self.n_windows if self.n_windows else 0.0,
            delayed_window_fraction=sum(w.delayed for w in eeep) / len(eeep) if eeep else 0.0,
            mean_tau=float(np.mean([w.tau for w in eeep])) if eeep else 0.0,
            windows=self.records,
            table=self.predictor.table,
        )


def run_eeep(trace: TrafficTrace, params: LinkParams, cfg: StrategyConfig,
             record_packets: bool = False) -> SimResult:
    """
    Simulate the predictive EEEP strategy.

    During the setup phase every window runs EEE while the predictor learns.
    Once the table has converged, at T' of each window the expected T2 load
    and tau are computed; if the expected load does not exceed the measured
    T1 load and the Hurst estimate exceeds H_bar, the link sleeps until
    T - (tau + delta_tau) and sends T2 in one tail, otherwise T2 runs EEE.
    Bits left at the end of a window are sent at the head of the next one.

    Returns:
        SimResult with per-window records, U, mean tau and the fraction of
        EEEP windows whose tail did not clear the queue
    """
    params.validate()
    cfg.validate(params)
    return _EeepRun(trace, params, cfg, record_packets).run()


def simulate_policy(policy: str, trace: TrafficTrace, params: LinkParams,
                    cfg: StrategyConfig, record_packets: bool = False) -> SimResult:
    """Dispatch to one of the three policy runners by name."""
    policy = InputValidator.validate_choice("policy", policy, POLICIES)
    if policy == 'on':
        return run_always_on(trace, params, record_packets)
    if policy == 'eee':
        return run_eee_burst(trace, params, cfg, record_packets)
    return run_eeep(trace, params, cfg, record_packets)
