"""
Traffic predictor for the EEEP strategy.

Keeps an online table of conditional probabilities P[L2 = l' | L1 = l]
between the quantized traffic of the first part of a window (T1) and of
its second part (T2). The table is learned from counts, checked for
convergence, and turned into an expected T2 load and a predicted
transmission time tau.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..utils.validators import InputValidator

logger = logging.getLogger(__name__)


@dataclass
class PredictionConfig:
    """
    Knobs of the predictive strategy.

    Attributes:
        theta: Convergence threshold on the per-row L1 change of P
        H_bar: Self-similarity gate; the tail is used only when H > H_bar
        h: Number of quantization levels
        p_tau: Safety extension of tau as a fraction of tau
        hurst_recheck_windows: Windows between online Hurst re-estimates
        hurst_override: Fixed Hurst value used instead of estimating it
    """
    theta: float = 0.05
    H_bar: float = 0.6
    h: int = 10
    p_tau: float = 0.0
    hurst_recheck_windows: int = 50
    hurst_override: Optional[float] = None

    def validate(self) -> None:
        InputValidator.validate_positive("prediction.theta", self.theta)
        InputValidator.validate_range("prediction.H_bar", self.H_bar, 0.5, 1.0)
        InputValidator.validate_int("prediction.h", self.h, minimum=2)
        InputValidator.validate_non_negative("prediction.p_tau", self.p_tau)
        InputValidator.validate_int("prediction.hurst_recheck_windows",
                                    self.hurst_recheck_windows, minimum=1)
        if self.hurst_override is not None:
            InputValidator.validate_range("prediction.hurst_override", self.hurst_override, 0.0, 1.0)


@dataclass
class QuantizerState:
    """Traffic limits seen so far in T1 and the derived quantization step."""
    h: int = 10
    v_min: float = 0.0
    v_max: float = 0.0
    initialized: bool = False

    @property
    def mu(self) -> float:
        return (self.v_max - self.v_min) / self.h

    def edges(self) -> np.ndarray:
        """Lower edges of levels 2..h."""
        return self.v_min + np.arange(1, self.h) * self.mu


@dataclass
class CondProbTable:
    """
    Occurrence counts C and row-stochastic probabilities P over h levels.

    Row and column indices are zero-based (level l lives at index l-1).
    """
    h: int = 10
    counts: np.ndarray = None
    probs: np.ndarray = None
    last_probs: Optional[np.ndarray] = None
    observations: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.h, self.h), dtype=np.int64)
        if self.probs is None:
            self.probs = np.zeros((self.h, self.h), dtype=np.float64)

    def populated_rows(self) -> np.ndarray:
        return self.counts.sum(axis=1) > 0

    def rebuild(self) -> None:
        row_sums = self.counts.sum(axis=1, keepdims=True)
        self.probs = np.divide(self.counts, row_sums, out=np.zeros(self.counts.shape),
                               where=row_sums > 0)


@dataclass(frozen=True)
class WindowObservation:
    """Bits that arrived in T1 = [iT, iT+T') and T2 = [iT+T', (i+1)T)."""
    v1: float
    v2: float

    def __post_init__(self):
        InputValidator.validate_non_negative("v1", self.v1)
        InputValidator.validate_non_negative("v2", self.v2)


def quantize_level(v: float, q: QuantizerState) -> int:
    """
    Map a traffic volume to its level in [1, h].

    Level 1 covers everything below v_min + mu, level h everything from
    v_min + (h-1)mu upwards. A zero-width quantizer maps everything to 1.

    Example:
        >>> quantize_level(55, QuantizerState(h=10, v_min=0, v_max=100, initialized=True))
        6
    """
    if q.v_max <= q.v_min:
        return 1
    return int(np.searchsorted(q.edges(), v, side='right')) + 1


def observe_window(table: CondProbTable, q: QuantizerState,
                   obs: WindowObservation) -> Tuple[CondProbTable, QuantizerState]:
    """
    Fold one completed window into the table.

    Updates v_min/v_max from v1, quantizes v1 and v2 with the new edges,
    snapshots the previous P, increments C(l1, l2) and rebuilds P.
    Existing counts are not re-binned when the edges move.

    Returns:
        The same (table, quantizer) objects, updated in place
    """
    if not q.initialized:
        q.v_min = q.v_max = float(obs.v1)
        q.initialized = True
    else:
        q.v_min = min(q.v_min, float(obs.v1))
        q.v_max = max(q.v_max, float(obs.v1))

    l1 = quantize_level(obs.v1, q)
    l2 = quantize_level(obs.v2, q)

    table.last_probs = table.probs.copy()
    table.counts[l1 - 1, l2 - 1] += 1
    table.observations += 1
    table.rebuild()

    return table, q


def has_converged(table: CondProbTable, theta: float) -> bool:
    """
    True iff every populated row of P moved by at most theta (L1) since the last update.

    An empty table, or one without a snapshot, has not converged.
    """
    if table.last_probs is None:
        return False

    populated = table.populated_rows()
    if not populated.any():
        return False

    distances = np.abs(table.probs - table.last_probs).sum(axis=1)
    return bool(np.all(distances[populated] <= theta))


def expected_future_load(table: CondProbTable, q: QuantizerState, l1: int) -> Optional[float]:
    """
    Expected T2 volume given the T1 level, over bin representatives.

    Levels below h are represented by their midpoint, level h by v_max.

    Returns:
        Expected bits, or None when row l1 has no observations
    """
    if l1 < 1 or l1 > table.h or table.counts[l1 - 1].sum() == 0:
        return None

    reps = q.v_min + (np.arange(1, table.h + 1) - 0.5) * q.mu
    reps[-1] = q.v_max
    return float(np.dot(table.probs[l1 - 1], reps))


def compute_tau(expected_bits: float, line_rate_f: float, p_tau: float) -> Tuple[float, float]:
    """
    Predicted tail transmission time and its safety extension, in seconds.

    Example:
        >>> compute_tau(1e6, 1e9, 0.2)
        (0.001, 0.0002)
    """
    InputValidator.validate_non_negative("expected_bits", expected_bits)
    InputValidator.validate_positive("line_rate_f", line_rate_f)
    InputValidator.validate_non_negative("p_tau", p_tau)

    tau = expected_bits / line_rate_f
    return tau, p_tau * tau


def diagonal_concentration(table: CondProbTable) -> Optional[float]:
    """
    Mean |l1 - argmax_l' P(l1, l')| over populated rows.

    Small values mean future traffic tends to stay at the current level.
    """
    populated = table.populated_rows()
    if not populated.any():
        return None

    rows = np.flatnonzero(populated)
    modes = np.argmax(table.probs[rows], axis=1)
    return float(np.mean(np.abs(rows - modes)))


@dataclass
class TrafficPredictor:
    """
    Bundles the table, the quantizer and the configuration of one run.

    The link simulator owns one instance and feeds it every completed window.
    """
    config: PredictionConfig = field(default_factory=PredictionConfig)
    table: CondProbTable = None
    quantizer: QuantizerState = None

    def __post_init__(self):
        self.config.validate()
        if self.table is None:
            self.table = CondProbTable(h=self.config.h)
        if self.quantizer is None:
            self.quantizer = QuantizerState(h=self.config.h)

    def observe(self, v1: float, v2: float) -> None:
        observe_window(self.table, self.quantizer, WindowObservation(v1, v2))

    def converged(self) -> bool:
        return has_converged(self.table, self.config.theta)

    def predict(self, v1: float) -> Tuple[int, Optional[float]]:
        """Return the T1 level of ``v1`` and the expected T2 bits (None if unknown)."""
        level = quantize_level(v1, self.quantizer)
        return level, expected_future_load(self.table, self.quantizer, level)
