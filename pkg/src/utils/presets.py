"""
Synthetic trace presets for eeesim.

This module contains the catalogue of trace families used throughout the
project and resolves a preset name into concrete ``synth.*`` configuration
values. Randomized presets draw their parameters from the run seed.
"""

from typing import Any, Dict

import numpy as np

from .validators import ValidationError


# Trace families: high-H and low-H Pareto superpositions, a randomized
# family and an uncorrelated Poisson control
SYNTH_PRESETS: Dict[str, Dict[str, Any]] = {
    'A-high': {
        'description': 'M=10 Pareto ON/OFF sources, alpha=1 (strongly self-similar)',
        'values': {'synth.model': 'pareto', 'synth.M': 10, 'synth.alpha': 1.0, 'synth.b': 1.0,
                   'synth.packet_size_bits': 8000},
    },
    'A-low': {
        'description': 'M=10 Pareto ON/OFF sources, alpha=1.8 (weakly self-similar)',
        'values': {'synth.model': 'pareto', 'synth.M': 10, 'synth.alpha': 1.8, 'synth.b': 1.0,
                   'synth.packet_size_bits': 8000},
    },
    'B-random': {
        'description': 'M in U(30,70), alpha in U(1.2,1.6), packet size in U(4368,11592) bits',
        'values': {'synth.model': 'pareto', 'synth.b': 1.0},
        'random': {'M': (30, 70), 'alpha': (1.2, 1.6), 'packet_size_bits': (4368, 11592)},
    },
    'iid-control': {
        'description': 'Poisson packet counts per tick (no long-range dependence)',
        'values': {'synth.model': 'poisson', 'synth.rate': 5.0, 'synth.packet_size_bits': 8000},
    },
}


class PresetManager:
    """
    Resolves synthesis presets into configuration values.
    """

    @staticmethod
    def resolve_preset(name: str, seed: int) -> Dict[str, Any]:
        """
        Get the ``synth.*`` values a preset stands for.

        Args:
            name: Preset name
            seed: Run seed, used by randomized presets

        Returns:
            Dict[str, Any]: Configuration values keyed by full key name

        Raises:
            ValidationError: If the preset is unknown

        Example:
            >>> PresetManager.resolve_preset('A-low', 1)['synth.alpha']
            1.8
        """
        name = PresetManager.validate_preset_for_command(name)
        preset = SYNTH_PRESETS[name]
        values = dict(preset['values'])

        drawn = preset.get('random')
        if drawn:
            rng = np.random.default_rng(seed)
            m_low, m_high = drawn['M']
            a_low, a_high = drawn['alpha']
            s_low, s_high = drawn['packet_size_bits']
            values['synth.M'] = int(rng.integers(m_low, m_high + 1))
            values['synth.alpha'] = float(rng.uniform(a_low, a_high))
            # Whole bytes
            values['synth.packet_size_bits'] = int(rng.integers(s_low // 8, s_high // 8 + 1)) * 8

        return values

    @staticmethod
    def format_preset_list() -> str:
        lines = []
        for i, (name, preset) in enumerate(SYNTH_PRESETS.items(), 1):
            lines.append(f"{i}. {name}: {preset['description']}")
        return "\n".join(lines)

    @staticmethod
    def validate_preset_for_command(name: str) -> str:
        """
        Validate a preset name and return it stripped.

        Raises:
            ValidationError: If the name is empty or unknown
        """
        if not name or not name.strip():
            raise ValidationError("Preset name cannot be empty")

        name = name.strip()
        if name not in SYNTH_PRESETS:
            raise ValidationError(
                f"Unknown preset '{name}'. Available presets: {', '.join(SYNTH_PRESETS)}"
            )
        return name
