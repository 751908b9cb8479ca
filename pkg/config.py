"""
Configuration settings for SPDRF - Self-Paced Deep Regression Forests
"""

import copy
import json
import os
from dataclasses import dataclass, field, fields, asdict, is_dataclass, replace
from typing import List, Dict, Any, Optional

from src.errors import InvalidConfigError, UnknownConfigKeyError

MODES = ("spdrf-capped", "spdrf", "drf-baseline")
ACTIVATIONS = ("tanh", "relu")
TARGET_FUNCTIONS = ("sinusoid_linear", "piecewise_ramp", "radial_bump")

# Evaluation protocols: first-pace fraction, exclusion fraction, batch size
PRESETS: Dict[str, Dict[str, float]] = {
    'morph': {'start_fraction': 0.1, 'exclude_fraction': 0.005, 'batch_size': 32},
    'fgnet': {'start_fraction': 0.5, 'exclude_fraction': 0.02, 'batch_size': 8},
}


def _default_fractions() -> List[float]:
    return [round(0.1 * k, 10) for k in range(1, 11)]


def _from_dict(cls, data: Dict[str, Any], prefix: str = ""):
    """Build a config dataclass from a (partial) dict, rejecting unknown keys.

    Missing keys keep their defaults; nested dataclass sections are merged
    recursively so a document may override a single nested value.
    """
    if not isinstance(data, dict):
        raise InvalidConfigError(f"Section '{prefix or cls.__name__}' must be a JSON object")

    defaults = cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise UnknownConfigKeyError(path)
        current = getattr(defaults, key)
        if is_dataclass(current):
            kwargs[key] = _from_dict(type(current), value, path)
        else:
            kwargs[key] = copy.deepcopy(value)
    return replace(defaults, **kwargs)


@dataclass
class BackboneConfig:
    """Feature network configuration"""
    input_dim: int = 8
    hidden_dims: List[int] = field(default_factory=lambda: [64])
    output_dim: int = 128
    activation: str = "tanh"
    seed: int = 0

    @property
    def layer_dims(self) -> List[int]:
        return [self.input_dim] + list(self.hidden_dims) + [self.output_dim]

    def validate(self):
        if any(int(d) < 1 for d in self.layer_dims):
            raise InvalidConfigError(f"Backbone layer dimensions must be positive: {self.layer_dims}")
        if self.activation not in ACTIVATIONS:
            raise InvalidConfigError(
                f"Unknown activation '{self.activation}' (expected one of {', '.join(ACTIVATIONS)})"
            )


@dataclass
class PaceSchedule:
    """Self-paced curriculum: selected fraction per pace and exclusion fraction"""
    fractions: List[float] = field(default_factory=_default_fractions)
    exclude_fraction: float = 0.005

    def __len__(self) -> int:
        return len(self.fractions)

    def validate(self):
        if not self.fractions:
            raise InvalidConfigError("Pace schedule needs at least one fraction")
        previous = 0.0
        for fraction in self.fractions:
            if not previous < fraction <= 1.0:
                raise InvalidConfigError(
                    f"Pace fractions must be strictly increasing within (0, 1]: {self.fractions}"
                )
            previous = fraction
        if not 0.0 <= self.exclude_fraction < 1.0:
            raise InvalidConfigError(f"exclude_fraction must be in [0, 1): {self.exclude_fraction}")

    @classmethod
    def from_start(cls, start_fraction: float, step: float = 0.1,
                   exclude_fraction: float = 0.005) -> 'PaceSchedule':
        """Schedule starting at start_fraction and growing by step up to 1.0"""
        if not 0.0 < start_fraction <= 1.0 or step <= 0.0:
            raise InvalidConfigError(f"Invalid schedule start/step: {start_fraction}/{step}")
        fractions = []
        fraction = start_fraction
        while fraction < 1.0 - 1e-9:
            fractions.append(round(fraction, 10))
            fraction += step
        fractions.append(1.0)
        return cls(fractions=fractions, exclude_fraction=exclude_fraction)

    @classmethod
    def preset(cls, name: str) -> 'PaceSchedule':
        if name not in PRESETS:
            raise InvalidConfigError(f"Unknown preset '{name}' (expected one of {', '.join(PRESETS)})")
        settings = PRESETS[name]
        return cls.from_start(settings['start_fraction'], 0.1, settings['exclude_fraction'])


@dataclass
class TrainConfig:
    """Forest, optimizer and curriculum settings"""
    tree_count: int = 5
    tree_depth: int = 6
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    pace: PaceSchedule = field(default_factory=PaceSchedule)

    batch_size: int = 32
    steps_per_pace: int = 500
    pretrain_steps: int = 500
    leaf_update_period: int = 50
    leaf_em_iterations: int = 2

    # Learning rate is multiplied by lr_decay_factor every lr_decay_every steps of a pace
    learning_rate: float = 0.1
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 500

    sigma2_floor: float = 1e-4
    worst_case_count: int = 5
    seed: int = 0

    def validate(self):
        positive = {
            'tree_count': self.tree_count,
            'tree_depth': self.tree_depth,
            'batch_size': self.batch_size,
            'steps_per_pace': self.steps_per_pace,
            'leaf_update_period': self.leaf_update_period,
            'leaf_em_iterations': self.leaf_em_iterations,
            'lr_decay_every': self.lr_decay_every,
        }
        for name, value in positive.items():
            if int(value) < 1:
                raise InvalidConfigError(f"{name} must be a positive integer: {value}")
        if self.pretrain_steps < 0:
            raise InvalidConfigError(f"pretrain_steps must be non-negative: {self.pretrain_steps}")
        if self.worst_case_count < 0:
            raise InvalidConfigError(f"worst_case_count must be non-negative: {self.worst_case_count}")
        if self.learning_rate < 0:
            raise InvalidConfigError(f"learning_rate must be non-negative: {self.learning_rate}")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise InvalidConfigError(f"lr_decay_factor must be in (0, 1]: {self.lr_decay_factor}")
        if self.sigma2_floor <= 0:
            raise InvalidConfigError(f"sigma2_floor must be positive: {self.sigma2_floor}")
        self.backbone.validate()
        self.pace.validate()

    def learning_rate_at(self, pace_step: int) -> float:
        """Step-decayed learning rate; the schedule restarts with every pace"""
        return self.learning_rate * self.lr_decay_factor ** (pace_step // self.lr_decay_every)

    def for_mode(self, mode: str) -> 'TrainConfig':
        """Copy of this config with the curriculum implied by a training mode"""
        updated = copy.deepcopy(self)
        if mode == "spdrf":
            updated.pace.exclude_fraction = 0.0
        elif mode == "drf-baseline":
            updated.pace = PaceSchedule(fractions=[1.0], exclude_fraction=0.0)
        elif mode != "spdrf-capped":
            raise InvalidConfigError(f"Unknown mode '{mode}' (expected one of {', '.join(MODES)})")
        return updated

    def with_preset(self, name: str) -> 'TrainConfig':
        updated = copy.deepcopy(self)
        updated.pace = PaceSchedule.preset(name)
        updated.batch_size = int(PRESETS[name]['batch_size'])
        return updated

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        return _from_dict(cls, data, "train")


@dataclass
class SyntheticSpec:
    """Synthetic noisy-regression benchmark settings"""
    n_samples: int = 2000
    n_test: int = 500
    feature_dim: int = 8
    target_function: str = "sinusoid_linear"
    noise_std: float = 2.0
    outlier_fraction: float = 0.15
    outlier_shift: float = 25.0
    seed: int = 0

    def validate(self):
        if self.n_samples < 1 or self.n_test < 1 or self.feature_dim < 1:
            raise InvalidConfigError("n_samples, n_test and feature_dim must be positive")
        if self.target_function not in TARGET_FUNCTIONS:
            raise InvalidConfigError(
                f"Unknown target function '{self.target_function}' "
                f"(expected one of {', '.join(TARGET_FUNCTIONS)})"
            )
        if self.noise_std < 0:
            raise InvalidConfigError(f"noise_std must be non-negative: {self.noise_std}")
        if not 0.0 <= self.outlier_fraction < 0.5:
            raise InvalidConfigError(f"outlier_fraction must be in [0, 0.5): {self.outlier_fraction}")
        if self.outlier_shift < 0:
            raise InvalidConfigError(f"outlier_shift must be non-negative: {self.outlier_shift}")


@dataclass
class PathsConfig:
    """Input and output file locations"""
    train_csv: str = "data/train.csv"
    test_csv: str = "data/test.csv"
    checkpoint: str = "runs/checkpoint.json"
    pace_report: str = "runs/pace_report.csv"
    worst_cases: str = "runs/worst_cases.csv"
    target_column: str = "t"


class RunConfig:
    """Main configuration class"""

    def __init__(self, train: Optional[TrainConfig] = None,
                 synthetic: Optional[SyntheticSpec] = None,
                 paths: Optional[PathsConfig] = None,
                 mode: str = "spdrf-capped"):
        self.train = train or TrainConfig()
        self.synthetic = synthetic or SyntheticSpec()
        self.paths = paths or PathsConfig()
        self.mode = mode

    def validate(self):
        if self.mode not in MODES:
            raise InvalidConfigError(f"Unknown mode '{self.mode}' (expected one of {', '.join(MODES)})")
        self.train.validate()
        self.synthetic.validate()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mode': self.mode,
            'train': asdict(self.train),
            'synthetic': asdict(self.synthetic),
            'paths': asdict(self.paths),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        if not isinstance(data, dict):
            raise InvalidConfigError("Configuration document must be a JSON object")
        sections = {'train': TrainConfig, 'synthetic': SyntheticSpec, 'paths': PathsConfig}
        for key in data:
            if key not in sections and key != 'mode':
                raise UnknownConfigKeyError(key)
        built = {name: _from_dict(section, data.get(name, {}), name)
                 for name, section in sections.items()}
        return cls(mode=data.get('mode', 'spdrf-capped'), **built)

    @classmethod
    def load_from_file(cls, config_path: str) -> 'RunConfig':
        """Load configuration from a JSON file"""
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise InvalidConfigError(f"Configuration file {config_path} is not valid JSON: {e}")
        run_config = cls.from_dict(data)
        run_config.validate()
        return run_config

    def save_to_file(self, config_path: str):
        """Save configuration to a JSON file"""
        directory = os.path.dirname(config_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(config_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


# Global configuration instance
config = RunConfig()
