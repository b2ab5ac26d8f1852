"""
Input validation utilities for eeesim.

This module provides validation functions for configuration values,
simulation parameters and data integrity checks.
"""

import math
from typing import Any, Iterable

from .units import UnitParser, UnitFormatError


class ValidationError(Exception):
    """Raised when input validation fails."""
    pass


class InputValidator:
    """
    Provides validation methods for parameters and configuration values.

    All methods either return the validated (and converted) value or
    raise ValidationError with a message naming the offending field.
    """

    @staticmethod
    def validate_number(name: str, value: Any) -> float:
        """
        Validate and convert a numeric value.

        Args:
            name: Field name used in error messages
            value: Number or numeric string

        Returns:
            float: Parsed value

        Raises:
            ValidationError: If the value is not a finite number
        """
        if isinstance(value, bool):
            raise ValidationError(f"{name} must be a number, got a boolean")

        if isinstance(value, (int, float)):
            if math.isnan(value) or math.isinf(value):
                raise ValidationError(f"{name} must be finite")
            return float(value)

        try:
            return UnitParser.parse_float(value)
        except UnitFormatError as e:
            raise ValidationError(f"{name}: {e}")

    @staticmethod
    def validate_positive(name: str, value: Any) -> float:
        number = InputValidator.validate_number(name, value)
        if number <= 0:
            raise ValidationError(f"{name} must be positive, got {number}")
        return number

    @staticmethod
    def validate_non_negative(name: str, value: Any) -> float:
        number = InputValidator.validate_number(name, value)
        if number < 0:
            raise ValidationError(f"{name} cannot be negative, got {number}")
        return number

    @staticmethod
    def validate_range(name: str, value: Any, low: float, high: float,
                       include_low: bool = True, include_high: bool = True) -> float:
        """
        Validate that a number lies in a (possibly open) interval.

        Raises:
            ValidationError: If the value is outside the interval
        """
        number = InputValidator.validate_number(name, value)
        below = number < low if include_low else number <= low
        above = number > high if include_high else number >= high
        if below or above:
            left = '[' if include_low else '('
            right = ']' if include_high else ')'
            raise ValidationError(f"{name} must be in {left}{low}, {high}{right}, got {number}")
        return number

    @staticmethod
    def validate_int(name: str, value: Any, minimum: int = None) -> int:
        """
        Validate an integer value, optionally with a lower bound.

        Accepts integral floats and numeric strings ("10", "10.0").
        """
        if isinstance(value, bool):
            raise ValidationError(f"{name} must be an integer, got a boolean")

        if not isinstance(value, int):
            number = InputValidator.validate_number(name, value)
            if number != int(number):
                raise ValidationError(f"{name} must be an integer, got {number}")
            value = int(number)

        if minimum is not None and value < minimum:
            raise ValidationError(f"{name} must be at least {minimum}, got {value}")

        return value

    @staticmethod
    def validate_bool(name: str, value: Any) -> bool:
        if isinstance(value, bool):
            return value

        text = str(value).strip().lower()
        if text in ('true', '1', 'yes', 'on'):
            return True
        if text in ('false', '0', 'no', 'off'):
            return False

        raise ValidationError(f"{name} must be true or false, got '{value}'")

    @staticmethod
    def validate_choice(name: str, value: str, choices: Iterable[str]) -> str:
        if not value or not isinstance(value, str):
            raise ValidationError(f"{name} cannot be empty")

        value = value.strip()
        choices = list(choices)
        if value not in choices:
            raise ValidationError(
                f"Invalid {name} '{value}'. Must be one of: {', '.join(choices)}"
            )

        return value

    @staticmethod
    def validate_multiple_of(name: str, value_ns: int, unit_name: str, unit_ns: int) -> int:
        """
        Validate that a duration is an integer multiple of a base unit.

        Raises:
            ValidationError: If ``value_ns`` is not a positive multiple of ``unit_ns``
        """
        if value_ns <= 0 or unit_ns <= 0 or value_ns % unit_ns != 0:
            raise ValidationError(
                f"{name} must be a positive multiple of {unit_name} "
                f"({value_ns} ns vs {unit_ns} ns)"
            )
        return value_ns
