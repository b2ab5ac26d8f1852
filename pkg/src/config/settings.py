"""
Configuration settings for the eeesim energy-efficient Ethernet simulator.

This module handles environment variables and process-level configuration.
Experiment parameters (link timings, strategy knobs, sweeps) live in
experiment configuration files, see ``src.config.experiment``.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file (for local development)
load_dotenv()


class Settings:
    """
    Application settings loaded from environment variables.

    Attributes:
        DEBUG: Enable debug logging
        LOG_FILE: Log file path, empty string disables file logging
        WORKERS: Worker processes used by parameter sweeps
        OUT_DIR: Default directory for report files
    """

    # Application Configuration
    DEBUG: bool = os.getenv('EEESIM_DEBUG', 'False').lower() == 'true'
    LOG_FILE: str = os.getenv('EEESIM_LOG_FILE', 'eeesim.log')

    # Sweep Configuration
    WORKERS: int = int(os.getenv('EEESIM_WORKERS', '0') or 0) or (os.cpu_count() or 1)

    # Output Configuration
    OUT_DIR: str = os.getenv('EEESIM_OUT_DIR', 'out')

    # Simulation limits
    MAX_AGGREGATION_POINTS: int = 64  # Upper bound on variance-time levels per fit
    HURST_CLAMP = (0.0, 1.0)  # Report range for the Hurst estimate

    @classmethod
    def validate(cls) -> None:
        """
        Validate that the configuration is usable.

        Raises:
            ValueError: If a setting is out of range
        """
        if cls.WORKERS < 1:
            raise ValueError("EEESIM_WORKERS must be at least 1")

        if not cls.OUT_DIR:
            raise ValueError("EEESIM_OUT_DIR cannot be empty")


# Global settings instance
settings = Settings()


def validate_environment() -> None:
    """
    Validate environment configuration on startup.

    Raises:
        ValueError: If configuration validation fails
    """
    try:
        settings.validate()
    except ValueError as e:
        print(f"✗ Configuration validation failed: {e}")
        raise
