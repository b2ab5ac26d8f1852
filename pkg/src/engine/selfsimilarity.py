"""
Self-similarity analysis for eeesim.

Estimates the Hurst parameter of a load series with the variance-time
method: the series is aggregated over blocks of increasing size ``a``,
the log10 variance of each aggregated process is regressed on log10 a,
and the slope beta gives H = 1 + beta/2.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import settings
from ..utils.validators import InputValidator, ValidationError
from .traffic_model import LoadSeries, aggregate_series

logger = logging.getLogger(__name__)


class DegenerateSeriesError(Exception):
    """Raised when a series cannot support a variance-time fit."""
    pass


@dataclass(frozen=True)
class VarianceTimePoint:
    a: int
    log10_a: float
    log10_var: float


@dataclass
class HurstEstimate:
    """
    Result of a variance-time fit.

    Attributes:
        H_hat: Raw estimate, exactly 1 + beta_hat/2
        beta_hat: Fitted log-log slope
        points: Points used in the fit
        r_squared: Coefficient of determination of the fit
        skipped_levels: Aggregation levels dropped for zero variance
    """
    H_hat: float
    beta_hat: float
    points: List[VarianceTimePoint]
    r_squared: float
    skipped_levels: List[int] = field(default_factory=list)

    @property
    def H_clamped(self) -> float:
        low, high = settings.HURST_CLAMP
        return min(max(self.H_hat, low), high)


def sample_autocovariance(series: LoadSeries, k: int) -> float:
    """
    Biased sample autocovariance at lag k: (1/n) * sum (x_t - m)(x_{t+k} - m).

    Raises:
        DegenerateSeriesError: If k is outside [0, n)
    """
    x = np.asarray(series.values, dtype=np.float64)
    n = len(x)
    if not isinstance(k, (int, np.integer)) or k < 0 or k >= n:
        raise DegenerateSeriesError(f"Lag {k} out of range for a series of length {n}")

    centered = x - x.mean()
    return float(np.dot(centered[:n - k], centered[k:]) / n)


def exact_ss_autocovariance(k: int, H: float, sigma2: float) -> float:
    """
    Autocovariance of an exactly second-order self-similar process.

    Returns:
        (sigma2/2) * ((k+1)^2H - 2k^2H + (k-1)^2H)

    Raises:
        ValidationError: If k < 1, H outside (0, 1] or sigma2 <= 0

    Example:
        >>> exact_ss_autocovariance(1, 0.5, 1.0)
        0.0
    """
    k = InputValidator.validate_int("k", k, minimum=1)
    H = InputValidator.validate_range("H", H, 0.0, 1.0, include_low=False)
    sigma2 = InputValidator.validate_positive("sigma2", sigma2)

    two_h = 2.0 * H
    return 0.5 * sigma2 * ((k + 1) ** two_h - 2.0 * k ** two_h + (k - 1) ** two_h)


def variance_time_points(series: LoadSeries,
                         a_values: Sequence[int]) -> Tuple[List[VarianceTimePoint], List[int]]:
    """
    Compute (log10 a, log10 variance) for each aggregation level.

    Levels whose aggregated process has zero variance are skipped and
    reported back as the second element of the result.

    Args:
        series: Load series to analyse
        a_values: Aggregation levels, each >= 1

    Returns:
        Tuple of (points in a-order, skipped levels)

    Raises:
        DegenerateSeriesError: If an aggregated process has fewer than two
            values, or fewer than two usable points remain
    """
    points: List[VarianceTimePoint] = []
    skipped: List[int] = []

    for a in a_values:
        a = InputValidator.validate_int("aggregation level", a, minimum=1)
        aggregated = aggregate_series(series, a)
        if len(aggregated) < 2:
            raise DegenerateSeriesError(
                f"Aggregation level {a} leaves {len(aggregated)} values (need 2)"
            )

        variance = float(np.var(aggregated.values))
        if variance <= 0.0:
            logger.warning(f"Zero variance at aggregation level {a}, skipping")
            skipped.append(a)
            continue

        points.append(VarianceTimePoint(a=a, log10_a=math.log10(a),
                                        log10_var=math.log10(variance)))

    if len(points) < 2:
        raise DegenerateSeriesError(
            f"Only {len(points)} usable variance-time point(s); need at least 2"
        )

    return points, skipped


def fit_line(points: Sequence[VarianceTimePoint]) -> Tuple[float, float, float]:
    """Least-squares line through the points: (slope, intercept, r_squared)."""
    if len(points) < 2:
        raise DegenerateSeriesError("Need at least 2 points to fit a slope")

    x = np.array([p.log10_a for p in points])
    y = np.array([p.log10_var for p in points])
    if np.ptp(x) == 0:
        raise DegenerateSeriesError("All points share the same aggregation level")

    slope, intercept = np.polyfit(x, y, 1)

    residual = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(residual ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    return float(slope), float(intercept), r_squared


def fit_slope(points: Sequence[VarianceTimePoint]) -> float:
    """
    Ordinary least-squares slope of log10 variance against log10 a.

    Raises:
        DegenerateSeriesError: With fewer than 2 points or equal abscissae
    """
    return fit_line(points)[0]


def default_aggregation_levels(n: int, min_a: int = 1) -> List[int]:
    """
    Powers of two from 1 up to n/10.

    Example:
        >>> default_aggregation_levels(100)
        [1, 2, 4, 8]
    """
    levels = []
    a = 1
    while a <= n / 10:
        if a >= min_a:
            levels.append(a)
        a *= 2
    return levels[:settings.MAX_AGGREGATION_POINTS]


def estimate_hurst(series: LoadSeries, a_values: Optional[Sequence[int]] = None,
                   min_a: int = 1) -> HurstEstimate:
    """
    Estimate the Hurst parameter of a load series.

    Args:
        series: Per-tick load series
        a_values: Aggregation levels; defaults to powers of two up to len/10
        min_a: Drop default levels below this value

    Returns:
        HurstEstimate: H_hat = 1 + beta_hat/2 with the fit details

    Raises:
        DegenerateSeriesError: If the series is too short or too flat

    Example:
        >>> est = estimate_hurst(bin_trace(trace, 0.001))
        >>> print(f"H = {est.H_hat:.3f}")
    """
    min_a = InputValidator.validate_int("min_a", min_a, minimum=1)
    if a_values is None:
        a_values = default_aggregation_levels(len(series), min_a)
    if not a_values:
        raise DegenerateSeriesError(f"Series of length {len(series)} is too short to analyse")

    try:
        points, skipped = variance_time_points(series, a_values)
    except ValidationError as e:
        raise DegenerateSeriesError(str(e))

    slope, _, r_squared = fit_line(points)
    estimate = HurstEstimate(
        H_hat=1.0 + slope / 2.0,
        beta_hat=slope,
        points=points,
        r_squared=r_squared,
        skipped_levels=skipped,
    )

    logger.debug(
        f"Hurst estimate {estimate.H_hat:.4f} (beta={slope:.4f}, R2={r_squared:.4f}, "
        f"{len(points)} levels)"
    )
    return estimate
