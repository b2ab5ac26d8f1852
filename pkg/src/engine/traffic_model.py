"""
Traffic model for eeesim.

This module generates synthetic self-similar traffic by superposing Pareto
ON/OFF sources, reads and writes packet traces in the packets-csv format,
and turns packet streams into per-tick load series and aggregated processes.

Trace file format ("packets-csv"):
    # line_rate_bps=1000000000 duration_s=200.0 label=A-high
    time_ns,size_bits
    0,8000
    1000000,8000

The header comment is optional. Without it, arrival times are shifted so the
first event is t=0 and the duration ends 1 ns after the last arrival.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..utils.units import UnitParser
from ..utils.validators import InputValidator, ValidationError

logger = logging.getLogger(__name__)

TRACE_FORMATS = ('packets-csv',)
CSV_HEADER = ['time_ns', 'size_bits']


class TraceFormatError(Exception):
    """Raised when a trace file cannot be parsed."""
    pass


@dataclass(frozen=True)
class PacketEvent:
    """A single packet arrival: time in ns from trace start, size in bits."""
    arrival_time: int
    size: int


@dataclass(eq=False)
class TrafficTrace:
    """
    Ordered packet arrivals with line-rate metadata.

    Arrivals and sizes are kept as parallel int64 arrays; ``events`` builds
    PacketEvent objects on demand.
    """
    arrival_ns: np.ndarray
    size_bits: np.ndarray
    duration_L: float
    line_rate_f: int
    label: str = ''

    def __post_init__(self):
        self.arrival_ns = np.asarray(self.arrival_ns, dtype=np.int64)
        self.size_bits = np.asarray(self.size_bits, dtype=np.int64)

        if self.arrival_ns.shape != self.size_bits.shape or self.arrival_ns.ndim != 1:
            raise ValidationError("Trace arrival and size arrays must be 1-D and equally long")
        InputValidator.validate_positive("duration_L", self.duration_L)
        self.line_rate_f = int(InputValidator.validate_positive("line_rate_f", self.line_rate_f))

        if len(self.arrival_ns):
            if np.any(self.size_bits <= 0):
                raise ValidationError("Packet sizes must be positive")
            if self.arrival_ns[0] < 0 or np.any(np.diff(self.arrival_ns) < 0):
                raise ValidationError("Packet arrivals must be non-negative and sorted")
            if self.arrival_ns[-1] >= self.duration_ns:
                raise ValidationError(
                    f"Packet at {self.arrival_ns[-1]} ns lies beyond the trace duration "
                    f"{self.duration_L} s"
                )

    def __len__(self) -> int:
        return len(self.arrival_ns)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrafficTrace):
            return NotImplemented
        return (self.duration_L == other.duration_L
                and self.line_rate_f == other.line_rate_f
                and np.array_equal(self.arrival_ns, other.arrival_ns)
                and np.array_equal(self.size_bits, other.size_bits))

    @property
    def duration_ns(self) -> int:
        return UnitParser.seconds_to_ns(self.duration_L)

    @property
    def total_bits(self) -> int:
        return int(self.size_bits.sum())

    @property
    def events(self) -> List[PacketEvent]:
        return [PacketEvent(int(t), int(s)) for t, s in zip(self.arrival_ns, self.size_bits)]

    @classmethod
    def from_events(cls, events: List[PacketEvent], duration_L: float,
                    line_rate_f: int, label: str = '') -> 'TrafficTrace':
        return cls(
            arrival_ns=np.array([e.arrival_time for e in events], dtype=np.int64),
            size_bits=np.array([e.size for e in events], dtype=np.int64),
            duration_L=duration_L,
            line_rate_f=line_rate_f,
            label=label,
        )


@dataclass(frozen=True)
class ParetoSourceConfig:
    """
    Parameters of a superposition of Pareto ON/OFF sources.

    Attributes:
        M: Number of sources
        alpha: Pareto tail index
        b: Pareto location (minimum period length) in ticks
        packet_size: Bits emitted by a source per ON tick
        seed: Seed of the random generator
    """
    M: int = 10
    alpha: float = 1.0
    b: float = 1.0
    packet_size: int = 8000
    seed: int = 1

    def validate(self) -> None:
        InputValidator.validate_int("M", self.M, minimum=0)
        InputValidator.validate_positive("alpha", self.alpha)
        InputValidator.validate_positive("b", self.b)
        InputValidator.validate_int("packet_size", self.packet_size, minimum=1)
        InputValidator.validate_int("seed", self.seed, minimum=0)


@dataclass
class LoadSeries:
    """Bits per tick; ``tick`` is in seconds."""
    tick: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TraceStats:
    """Summary figures of a trace relative to a burst unit T_B."""
    n_packets: int
    total_bits: int
    mean_size_bits: float
    n_bar: float
    t_pack_bar: float
    offered_load: float


def pareto_sample(alpha: float, b: float, u: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Map uniform samples in (0, 1] to Pareto durations by CDF inversion.

    Args:
        alpha: Tail index
        b: Location (lower support)
        u: Uniform sample(s) in (0, 1]

    Returns:
        b * u ** (-1/alpha), same shape as ``u``

    Raises:
        ValidationError: If u is outside (0, 1] or alpha/b are not positive

    Example:
        >>> pareto_sample(1.0, 1.0, 0.5)
        2.0
    """
    InputValidator.validate_positive("alpha", alpha)
    InputValidator.validate_positive("b", b)

    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0) or np.any(u_arr > 1) or np.any(np.isnan(u_arr)):
        raise ValidationError("Uniform samples must lie in (0, 1]")

    samples = b * np.power(u_arr, -1.0 / alpha)
    if samples.ndim == 0:
        return float(samples)
    return samples


def _source_on_intervals(rng: np.random.Generator, cfg: ParetoSourceConfig,
                         n_ticks: int) -> np.ndarray:
    """Return (start, end) tick pairs of one source's ON periods, clipped to n_ticks."""
    first_on = rng.random() < 0.5
    batch = max(1024, n_ticks // 2)

    chunks = []
    covered = 0
    while covered < n_ticks:
        u = 1.0 - rng.random(batch)
        lengths = np.ceil(np.minimum(pareto_sample(cfg.alpha, cfg.b, u), n_ticks + 1))
        lengths = lengths.astype(np.int64)
        chunks.append(lengths)
        covered += int(lengths.sum())

    periods = np.concatenate(chunks)
    ends = np.cumsum(periods)
    starts = ends - periods

    on = slice(0 if first_on else 1, None, 2)
    return np.stack([np.minimum(starts[on], n_ticks), np.minimum(ends[on], n_ticks)], axis=1)


def synthesize_trace(cfg: ParetoSourceConfig, duration_L: float, tick: float,
                     line_rate_f: int, label: str = '') -> TrafficTrace:
    """
    Generate a trace from M superposed Pareto ON/OFF sources.

    Each source alternates i.i.d. Pareto ON and OFF periods (rounded up to
    whole ticks, initial state drawn at random) and emits one packet of
    ``cfg.packet_size`` bits at the start of every ON tick.

    Args:
        cfg: Source configuration (including the seed)
        duration_L: Trace length in seconds
        tick: Source tick in seconds
        line_rate_f: Link rate in bits/s

    Returns:
        TrafficTrace: Time-ordered merge of all sources
    """
    cfg.validate()
    InputValidator.validate_positive("duration_L", duration_L)
    InputValidator.validate_positive("tick", tick)

    tick_ns = UnitParser.seconds_to_ns(tick)
    duration_ns = UnitParser.seconds_to_ns(duration_L)
    n_ticks = duration_ns // tick_ns
    if tick_ns <= 0 or n_ticks <= 0:
        raise ValidationError("Trace must span at least one tick")

    rng = np.random.default_rng(cfg.seed)
    delta = np.zeros(n_ticks + 1, dtype=np.int64)
    for _ in range(cfg.M):
        intervals = _source_on_intervals(rng, cfg, n_ticks)
        np.add.at(delta, intervals[:, 0], 1)
        np.add.at(delta, intervals[:, 1], -1)

    active_sources = np.cumsum(delta[:-1])
    arrivals = np.repeat(np.arange(n_ticks, dtype=np.int64) * tick_ns, active_sources)
    sizes = np.full(len(arrivals), cfg.packet_size, dtype=np.int64)

    logger.debug(
        f"Synthesized {len(arrivals)} packets from {cfg.M} sources "
        f"(alpha={cfg.alpha}, b={cfg.b}, seed={cfg.seed})"
    )
    return TrafficTrace(arrivals, sizes, duration_L, line_rate_f, label)


def synthesize_poisson_trace(mean_packets_per_tick: float, packet_size: int,
                             duration_L: float, tick: float, line_rate_f: int,
                             seed: int, label: str = '') -> TrafficTrace:
    """
    Generate an uncorrelated control trace: Poisson packet counts per tick.

    Used as the short-range-dependent baseline (Hurst parameter 0.5).
    """
    InputValidator.validate_non_negative("mean_packets_per_tick", mean_packets_per_tick)
    InputValidator.validate_int("packet_size", packet_size, minimum=1)
    InputValidator.validate_positive("duration_L", duration_L)
    InputValidator.validate_positive("tick", tick)

    tick_ns = UnitParser.seconds_to_ns(tick)
    n_ticks = UnitParser.seconds_to_ns(duration_L) // tick_ns
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_packets_per_tick, n_ticks)

    arrivals = np.repeat(np.arange(n_ticks, dtype=np.int64) * tick_ns, counts)
    sizes = np.full(len(arrivals), packet_size, dtype=np.int64)
    return TrafficTrace(arrivals, sizes, duration_L, line_rate_f, label)


def bin_trace(trace: TrafficTrace, tick: float) -> LoadSeries:
    """
    Sum packet bits per tick: values[i] covers [i*tick, (i+1)*tick).

    The last bin may be partial when the tick does not divide the duration;
    every packet is counted exactly once either way.
    """
    InputValidator.validate_positive("tick", tick)
    tick_ns = UnitParser.seconds_to_ns(tick)
    if tick_ns <= 0:
        raise ValidationError("tick is below 1 ns")

    n_bins = -(-trace.duration_ns // tick_ns)
    values = np.bincount(trace.arrival_ns // tick_ns, weights=trace.size_bits,
                         minlength=n_bins)
    return LoadSeries(tick=tick, values=values[:n_bins])


def aggregate_series(series: LoadSeries, a: int) -> LoadSeries:
    """
    Aggregated process: means over non-overlapping blocks of ``a`` ticks.

    The trailing partial block is discarded.

    Raises:
        ValidationError: If a < 1

    Example:
        [1, 2, 3, 4] with a=2 -> [1.5, 3.5]
    """
    a = InputValidator.validate_int("aggregation level", a, minimum=1)
    if a == 1:
        return LoadSeries(tick=series.tick, values=series.values.copy())

    blocks = len(series.values) // a
    values = series.values[:blocks * a].reshape(blocks, a).mean(axis=1)
    return LoadSeries(tick=series.tick * a, values=values)


def trace_stats(trace: TrafficTrace, T_B: float) -> TraceStats:
    """
    Compute the per-burst-unit figures used by the closed-form analysis.

    Returns:
        TraceStats with N̄ (packets per T_B), T̄_pack (seconds per packet),
        d̄ (bits per packet) and the offered load fraction
    """
    InputValidator.validate_positive("T_B", T_B)
    n_units = trace.duration_L / T_B
    n_packets = len(trace)
    total_bits = trace.total_bits

    mean_size = total_bits / n_packets if n_packets else 0.0
    return TraceStats(
        n_packets=n_packets,
        total_bits=total_bits,
        mean_size_bits=mean_size,
        n_bar=n_packets / n_units,
        t_pack_bar=mean_size / trace.line_rate_f,
        offered_load=total_bits / (trace.duration_L * trace.line_rate_f),
    )


def _parse_header_comment(line: str, line_no: int) -> dict:
    fields = {}
    for token in line.lstrip('#').split():
        if '=' not in token:
            continue
        key, value = token.split('=', 1)
        fields[key.strip()] = value.strip()

    parsed = {}
    try:
        if 'line_rate_bps' in fields:
            parsed['line_rate_f'] = int(fields['line_rate_bps'])
        if 'duration_s' in fields:
            parsed['duration_L'] = float(fields['duration_s'])
    except ValueError:
        raise TraceFormatError(f"line {line_no}: invalid header comment '{line.strip()}'")

    if 'label' in fields:
        parsed['label'] = fields['label']
    return parsed


def ingest_trace_file(path: Union[str, Path], fmt: str = 'packets-csv',
                      strict: bool = False, line_rate_f: int = 1_000_000_000) -> TrafficTrace:
    """
    Read a trace file.

    Args:
        path: File to read
        fmt: Trace format, only "packets-csv" is supported
        strict: Reject non-monotone timestamps instead of sorting them
        line_rate_f: Link rate used when the file has no header comment

    Returns:
        TrafficTrace: Parsed, time-sorted trace

    Raises:
        TraceFormatError: On malformed rows (the message names the line),
            an empty file, or unsorted timestamps in strict mode
    """
    InputValidator.validate_choice("trace format", fmt, TRACE_FORMATS)
    path = Path(path)

    header = {}
    times: List[int] = []
    sizes: List[int] = []
    seen_columns = False
    saw_content = False
    unsorted_line: Optional[int] = None

    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        for row in reader:
            line_no = reader.line_num
            if not row or not ''.join(row).strip():
                continue
            saw_content = True

            if row[0].lstrip().startswith('#'):
                header.update(_parse_header_comment(','.join(row), line_no))
                continue

            if not seen_columns:
                if [c.strip() for c in row] != CSV_HEADER:
                    raise TraceFormatError(
                        f"line {line_no}: expected header '{','.join(CSV_HEADER)}'"
                    )
                seen_columns = True
                continue

            if len(row) != 2:
                raise TraceFormatError(f"line {line_no}: expected 2 columns, got {len(row)}")
            try:
                t = int(row[0])
                s = int(row[1])
            except ValueError:
                raise TraceFormatError(f"line {line_no}: non-integer value in '{','.join(row)}'")

            if s <= 0:
                raise TraceFormatError(f"line {line_no}: packet size must be positive, got {s}")
            if t < 0:
                raise TraceFormatError(f"line {line_no}: negative timestamp {t}")
            if times and t < times[-1] and unsorted_line is None:
                unsorted_line = line_no
                if strict:
                    raise TraceFormatError(f"line {line_no}: timestamp {t} goes backwards")

            times.append(t)
            sizes.append(s)

    if not saw_content:
        raise TraceFormatError(f"{path}: empty trace file")
    if not seen_columns:
        raise TraceFormatError(f"{path}: missing '{','.join(CSV_HEADER)}' header")

    arrivals = np.array(times, dtype=np.int64)
    size_arr = np.array(sizes, dtype=np.int64)
    if unsorted_line is not None:
        logger.warning(f"{path}: timestamps not sorted (first at line {unsorted_line}), sorting")
        order = np.argsort(arrivals, kind='stable')
        arrivals, size_arr = arrivals[order], size_arr[order]

    if 'duration_L' in header:
        duration_L = header['duration_L']
        last = int(arrivals[-1]) if len(arrivals) else -1
        if last >= UnitParser.seconds_to_ns(duration_L):
            raise TraceFormatError(
                f"{path}: arrival {last} ns lies beyond declared duration {duration_L} s"
            )
    else:
        if not len(arrivals):
            raise TraceFormatError(f"{path}: no packets and no declared duration")
        arrivals = arrivals - arrivals[0]
        duration_L = UnitParser.ns_to_seconds(int(arrivals[-1]) + 1)

    trace = TrafficTrace(
        arrival_ns=arrivals,
        size_bits=size_arr,
        duration_L=duration_L,
        line_rate_f=header.get('line_rate_f', line_rate_f),
        label=header.get('label', path.stem),
    )
    logger.info(f"Loaded {len(trace)} packets ({trace.total_bits} bits) from {path}")
    return trace


def export_trace_file(trace: TrafficTrace, path: Union[str, Path]) -> Path:
    """
    Write a trace as packets-csv, header comment included.

    ``ingest_trace_file`` on the written file reproduces the trace.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    label = '_'.join(trace.label.split())
    comment = f"# line_rate_bps={trace.line_rate_f} duration_s={trace.duration_L!r}"
    if label:
        comment += f" label={label}"

    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(comment + '\n')
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        writer.writerows(zip(trace.arrival_ns.tolist(), trace.size_bits.tolist()))

    return path
