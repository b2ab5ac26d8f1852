"""
Unit parsing and conversion utilities for eeesim.

This module handles conversion between the units used across the project:
- Configuration: milliseconds / microseconds / seconds as text ("0.202")
- Simulation: integer nanoseconds (202000)
- Reports: seconds as float, durations formatted for humans ("0.202 ms")

It also parses the value lists used by sweep axes ("0,0.1,0.2" or "0:0.8:0.1").
"""

import math
from typing import List


class UnitFormatError(Exception):
    """Raised when a value or range string cannot be parsed."""
    pass


class UnitParser:
    """
    Handles numeric parsing and time unit conversion.

    All simulated time is kept in integer nanoseconds so that state
    residencies add up exactly; conversions happen only at the edges.
    """

    NS_PER_SECOND = 1_000_000_000
    NS_PER_MS = 1_000_000
    NS_PER_US = 1_000

    @staticmethod
    def seconds_to_ns(seconds: float) -> int:
        """
        Convert seconds to the nearest integer nanosecond.

        Example:
            >>> UnitParser.seconds_to_ns(0.000202)
            202000
        """
        return int(round(seconds * UnitParser.NS_PER_SECOND))

    @staticmethod
    def ms_to_ns(milliseconds: float) -> int:
        return int(round(milliseconds * UnitParser.NS_PER_MS))

    @staticmethod
    def ns_to_seconds(nanoseconds: int) -> float:
        return nanoseconds / UnitParser.NS_PER_SECOND

    @staticmethod
    def serialization_ns(size_bits: int, line_rate_bps: int) -> int:
        """
        Time needed to put ``size_bits`` on a link of ``line_rate_bps``.

        Rounded up to whole nanoseconds so a packet never finishes early.
        Integer numpy arrays are converted element-wise.

        Example:
            >>> UnitParser.serialization_ns(8000, 1_000_000_000)
            8000
        """
        return -(-size_bits * UnitParser.NS_PER_SECOND // line_rate_bps)

    @staticmethod
    def format_duration(nanoseconds: int) -> str:
        """
        Format a duration for display, picking a readable unit.

        Example:
            >>> UnitParser.format_duration(202000)
            '0.202 ms'
        """
        if nanoseconds >= UnitParser.NS_PER_SECOND:
            return f"{nanoseconds / UnitParser.NS_PER_SECOND:.3f} s"
        if nanoseconds >= UnitParser.NS_PER_US * 100:
            return f"{nanoseconds / UnitParser.NS_PER_MS:.3f} ms"
        return f"{nanoseconds / UnitParser.NS_PER_US:.3f} us"

    @staticmethod
    def parse_float(text: str) -> float:
        if not isinstance(text, str) or not text.strip():
            raise UnitFormatError("Value cannot be empty")
        try:
            value = float(text.strip())
        except ValueError:
            raise UnitFormatError(f"Invalid number: '{text}'")
        if math.isnan(value) or math.isinf(value):
            raise UnitFormatError(f"Value must be finite: '{text}'")
        return value

    @staticmethod
    def parse_value_list(text: str) -> List[str]:
        """
        Expand a sweep axis value text into a list of value strings.

        Accepts either a comma separated list or an inclusive range
        ``start:stop:step``.

        Raises:
            UnitFormatError: If the text is empty or malformed

        Example:
            >>> UnitParser.parse_value_list("0:0.2:0.1")
            ['0', '0.1', '0.2']
        """
        if not text or not text.strip():
            raise UnitFormatError("Sweep axis has no values")

        text = text.strip()
        if ':' not in text:
            values = [v.strip() for v in text.split(',') if v.strip()]
            if not values:
                raise UnitFormatError("Sweep axis has no values")
            return values

        parts = text.split(':')
        if len(parts) != 3:
            raise UnitFormatError(f"Invalid range '{text}'. Expected start:stop:step")

        start, stop, step = (UnitParser.parse_float(p) for p in parts)
        if step <= 0:
            raise UnitFormatError(f"Range step must be positive: '{text}'")
        if stop < start:
            raise UnitFormatError(f"Range stop is below start: '{text}'")

        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [f"{round(start + i * step, 12):.12g}" for i in range(count)]
