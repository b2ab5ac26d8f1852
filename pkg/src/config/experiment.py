"""
Experiment configuration for eeesim.

An experiment is described by a flat ``key=value`` file with section
prefixes, for example::

    # Real-#1-like setup
    trace.preset=A-high
    link.t_s_ms=0.202
    strategy.T_ms=100
    sweep.prediction.p_tau=0:0.8:0.1

Values are layered, lowest precedence first: built-in defaults, preset
values, the config file, ``--set key=value`` overrides, dedicated flags.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from dotenv import dotenv_values

from ..engine.link_sim import POLICIES, LinkParams, StrategyConfig
from ..engine.predictor import PredictionConfig
from ..engine.theory import TheoryInputs
from ..engine.traffic_model import ParetoSourceConfig
from ..utils.presets import PresetManager
from ..utils.units import UnitFormatError, UnitParser
from ..utils.validators import InputValidator, ValidationError
from .settings import settings

logger = logging.getLogger(__name__)

DEFAULT_PRESET = 'A-high'
SWEEP_PREFIX = 'sweep.'
RUN_POLICIES = POLICIES + ('all',)
SYNTH_MODELS = ('pareto', 'poisson')


def _text(name: str, value: Any) -> str:
    return '' if value is None else str(value).strip()


def _optional_float(name: str, value: Any) -> Optional[float]:
    if value is None or str(value).strip() == '':
        return None
    return InputValidator.validate_number(name, value)


def _choice(choices: Sequence[str]) -> Callable[[str, Any], str]:
    return lambda name, value: InputValidator.validate_choice(name, str(value), choices)


# key -> (parser, default)
SCHEMA: Dict[str, Tuple[Callable[[str, Any], Any], Any]] = {
    'trace.preset': (_text, ''),
    'trace.path': (_text, ''),
    'trace.strict': (InputValidator.validate_bool, False),

    'synth.model': (_choice(SYNTH_MODELS), 'pareto'),
    'synth.M': (lambda n, v: InputValidator.validate_int(n, v, minimum=0), 10),
    'synth.alpha': (InputValidator.validate_positive, 1.0),
    'synth.b': (InputValidator.validate_positive, 1.0),
    'synth.packet_size_bits': (lambda n, v: InputValidator.validate_int(n, v, minimum=1), 8000),
    'synth.rate': (InputValidator.validate_non_negative, 5.0),
    'synth.tick_ms': (InputValidator.validate_positive, 1.0),
    'synth.duration_s': (InputValidator.validate_positive, 200.0),
    'synth.line_rate_bps': (lambda n, v: InputValidator.validate_int(n, v, minimum=1), 1_000_000_000),

    'link.line_rate_bps': (lambda n, v: InputValidator.validate_int(n, v, minimum=1), 1_000_000_000),
    'link.t_s_ms': (InputValidator.validate_non_negative, 0.202),
    'link.t_w_ms': (InputValidator.validate_non_negative, 0.0165),
    'link.t_r_ms': (InputValidator.validate_non_negative, 0.2),
    'link.refresh_period_ms': (InputValidator.validate_positive, 20.0),
    'link.pw_on_w': (InputValidator.validate_positive, 0.697),
    'link.pw_off_w': (InputValidator.validate_non_negative, 0.053),

    'strategy.T_ms': (InputValidator.validate_positive, 100.0),
    'strategy.T_prime_ms': (InputValidator.validate_positive, 50.0),
    'strategy.T_B_ms': (InputValidator.validate_positive, 1.0),
    'strategy.model_faithful_eee': (InputValidator.validate_bool, True),
    'strategy.refresh_enabled': (InputValidator.validate_bool, False),

    'prediction.theta': (InputValidator.validate_positive, 0.05),
    'prediction.H_bar': (lambda n, v: InputValidator.validate_range(n, v, 0.5, 1.0), 0.6),
    'prediction.h': (lambda n, v: InputValidator.validate_int(n, v, minimum=2), 10),
    'prediction.p_tau': (InputValidator.validate_non_negative, 0.0),
    'prediction.hurst_recheck_windows': (lambda n, v: InputValidator.validate_int(n, v, minimum=1), 50),
    'prediction.hurst_override': (_optional_float, None),

    'analyze.tick_ms': (InputValidator.validate_positive, 1.0),
    'analyze.min_a': (lambda n, v: InputValidator.validate_int(n, v, minimum=1), 1),

    'theory.n_bar': (InputValidator.validate_non_negative, 13.3),
    'theory.t_pack_us': (InputValidator.validate_positive, 5.68),
    'theory.tau_ms': (InputValidator.validate_non_negative, 3.8),
    'theory.U': (lambda n, v: InputValidator.validate_range(n, v, 0.0, 1.0), 0.827),
    'theory.L_s': (InputValidator.validate_positive, 200.0),

    'run.seed': (lambda n, v: InputValidator.validate_int(n, v, minimum=0), 1),
    'run.policy': (_choice(RUN_POLICIES), 'all'),
    'run.out_dir': (_text, None),
}


@dataclass
class ExperimentConfig:
    """
    Resolved, typed experiment configuration.

    Attributes:
        values: Typed value per schema key
        sweep_axes: (key, raw values) pairs in declaration order
        explicit: Raw values that did not come from defaults or presets
    """
    values: Dict[str, Any]
    sweep_axes: List[Tuple[str, List[str]]] = field(default_factory=list)
    explicit: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @classmethod
    def from_sources(cls, config_path: Optional[str] = None,
                     overrides: Sequence[str] = (),
                     flags: Optional[Mapping[str, Any]] = None) -> 'ExperimentConfig':
        """
        Build a configuration from the layered sources.

        Args:
            config_path: Optional key=value file
            overrides: ``key=value`` strings from ``--set``
            flags: Values of dedicated flags (None entries are ignored)

        Returns:
            ExperimentConfig: Validated configuration

        Raises:
            ValidationError: On unknown keys, bad values, a missing file or
                conflicting trace sources
        """
        explicit: Dict[str, str] = {}

        if config_path:
            path = Path(config_path)
            if not path.is_file():
                raise ValidationError(f"Config file not found: {config_path}")
            for key, value in dotenv_values(path, interpolate=False).items():
                explicit[key.strip()] = '' if value is None else value

        for item in overrides:
            if '=' not in item:
                raise ValidationError(f"Invalid override '{item}'. Expected key=value")
            key, value = item.split('=', 1)
            explicit[key.strip()] = value.strip()

        for key, value in (flags or {}).items():
            if value is not None:
                explicit[key] = str(value)

        return cls.resolve(explicit)

    @classmethod
    def resolve(cls, explicit: Mapping[str, str]) -> 'ExperimentConfig':
        """Layer defaults, preset values and explicit values, then validate."""
        sweep_axes: List[Tuple[str, List[str]]] = []
        plain: Dict[str, str] = {}

        for key, raw in explicit.items():
            if key.startswith(SWEEP_PREFIX):
                target = key[len(SWEEP_PREFIX):]
                if target not in SCHEMA or target.startswith('run.'):
                    raise ValidationError(f"Sweep axis '{key}' does not name a sweepable parameter")
                try:
                    sweep_axes.append((target, UnitParser.parse_value_list(raw)))
                except UnitFormatError as e:
                    raise ValidationError(f"{key}: {e}")
            elif key in SCHEMA:
                plain[key] = raw
            else:
                raise ValidationError(f"Unknown configuration key '{key}'")

        values = {key: default for key, (_, default) in SCHEMA.items()}
        values['run.out_dir'] = settings.OUT_DIR

        preset = _text('trace.preset', plain.get('trace.preset', ''))
        path = _text('trace.path', plain.get('trace.path', ''))
        if preset and path:
            raise ValidationError("Set exactly one trace source: trace.preset or trace.path")
        if not path:
            preset = preset or DEFAULT_PRESET
            seed = SCHEMA['run.seed'][0]('run.seed', plain.get('run.seed', values['run.seed']))
            values.update(PresetManager.resolve_preset(preset, seed))
            values['trace.preset'] = preset

        for key, raw in plain.items():
            parser = SCHEMA[key][0]
            values[key] = parser(key, raw)

        config = cls(values=values, sweep_axes=sweep_axes, explicit=dict(explicit))
        config.validate()
        return config

    def with_values(self, updates: Mapping[str, str]) -> 'ExperimentConfig':
        """Copy with some keys replaced (used for sweep points); sweep axes are dropped."""
        explicit = {k: v for k, v in self.explicit.items() if not k.startswith(SWEEP_PREFIX)}
        explicit.update(updates)
        return ExperimentConfig.resolve(explicit)

    def validate(self) -> None:
        params = self.link_params()
        params.validate()
        self.strategy_config().validate(params)

    @property
    def trace_path(self) -> Optional[str]:
        return self.values['trace.path'] or None

    @property
    def preset(self) -> Optional[str]:
        return None if self.trace_path else self.values['trace.preset']

    @property
    def seed(self) -> int:
        return self.values['run.seed']

    @property
    def out_dir(self) -> Path:
        return Path(self.values['run.out_dir'] or settings.OUT_DIR)

    def policies(self) -> List[str]:
        policy = self.values['run.policy']
        return list(POLICIES) if policy == 'all' else [policy]

    def source_config(self) -> ParetoSourceConfig:
        return ParetoSourceConfig(
            M=self.values['synth.M'],
            alpha=self.values['synth.alpha'],
            b=self.values['synth.b'],
            packet_size=self.values['synth.packet_size_bits'],
            seed=self.seed,
        )

    def link_params(self) -> LinkParams:
        v = self.values
        return LinkParams(
            line_rate_f=v['link.line_rate_bps'],
            t_s=v['link.t_s_ms'] / 1e3,
            t_w=v['link.t_w_ms'] / 1e3,
            t_r=v['link.t_r_ms'] / 1e3,
            refresh_period=v['link.refresh_period_ms'] / 1e3,
            pw_on=v['link.pw_on_w'],
            pw_off=v['link.pw_off_w'],
        )

    def prediction_config(self) -> PredictionConfig:
        v = self.values
        return PredictionConfig(
            theta=v['prediction.theta'],
            H_bar=v['prediction.H_bar'],
            h=v['prediction.h'],
            p_tau=v['prediction.p_tau'],
            hurst_recheck_windows=v['prediction.hurst_recheck_windows'],
            hurst_override=v['prediction.hurst_override'],
        )

    def strategy_config(self) -> StrategyConfig:
        v = self.values
        return StrategyConfig(
            T=v['strategy.T_ms'] / 1e3,
            T_prime=v['strategy.T_prime_ms'] / 1e3,
            T_B=v['strategy.T_B_ms'] / 1e3,
            prediction=self.prediction_config(),
            model_faithful_eee=v['strategy.model_faithful_eee'],
            refresh_enabled=v['strategy.refresh_enabled'],
        )

    def theory_inputs(self) -> TheoryInputs:
        """Inputs for theory-only evaluation, from the ``theory.*`` keys."""
        v = self.values
        params = self.link_params()
        tau = v['theory.tau_ms'] / 1e3
        return TheoryInputs(
            N_bar=v['theory.n_bar'],
            T_pack_bar=v['theory.t_pack_us'] / 1e6,
            T=v['strategy.T_ms'] / 1e3,
            T_prime=v['strategy.T_prime_ms'] / 1e3,
            T_B=v['strategy.T_B_ms'] / 1e3,
            T_trans=params.T_trans,
            tau_bar=tau,
            delta_tau_bar=v['prediction.p_tau'] * tau,
            U=v['theory.U'],
            pw_on=params.pw_on,
            pw_off=params.pw_off,
            L=v['theory.L_s'],
        )

    def params_echo(self) -> Dict[str, Any]:
        """Resolved flat configuration, sorted by key, for report files."""
        echo = {k: self.values[k] for k in sorted(self.values)}
        for key, raw in self.sweep_axes:
            echo[f"{SWEEP_PREFIX}{key}"] = ','.join(raw)
        return echo
