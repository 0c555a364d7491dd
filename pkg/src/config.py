"""
Experiment configuration.

One YAML (or JSON) file describes a run: data paths, the synthetic cohort, the
LLM client, model grids, ensembles, calibration and evaluation. Every section is a
dataclass with documented defaults; unknown keys anywhere are rejected.

Usage:
    config = load_config('config.yaml', overrides=['evaluation.split_mode=random'])
    config.seed = 7
"""
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import yaml

from .core.errors import ConfigError, ValidationError
from .core.models import AgeGroup
from .llm.llm_client import LlmClientConfig

DEFAULT_SEED = 42


@dataclass
class DataConfig:
    """Input files; unset cohort paths fall back to what `synth` writes into output_dir."""

    records: Optional[str] = None
    embeddings: Optional[str] = None
    llm_predictions: Optional[str] = None
    external_predictions: List[str] = field(default_factory=list)
    symptom_labels: Optional[str] = None


@dataclass
class SiteSection:
    name: str = 'site'
    n: int = 300
    prevalence: Any = 'uniform'  # 'uniform', 'random' or a list of C weights
    flip_rate: float = 0.0


@dataclass
class SynthSection:
    sites: List[SiteSection] = field(default_factory=list)
    symptom_count: int = 40
    embedding_dim: int = 16
    class_separation: float = 2.0
    missing_rate: float = 0.05
    narrative_rate: float = 0.9
    embedding_format: str = 'csv'  # 'csv' or 'bin'
    llm_top1_accuracy: Optional[float] = 0.5  # None skips simulated LLM predictions
    llm_bias: float = 0.0
    llm_biased_cause: Optional[str] = None


@dataclass
class ModelConfig:
    lambda_grid: List[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0])
    max_iter: int = 2000
    tol: float = 1e-6


@dataclass
class EnsembleConfig:
    weighted: bool = True
    stacker: bool = True
    grid_step: float = 0.05


@dataclass
class CalibrationConfig:
    enabled: bool = True
    stratify: bool = True
    top_n: int = 5
    target: Optional[List[float]] = None


@dataclass
class EvaluationConfig:
    split_mode: str = 'loso'  # 'loso' or 'random'
    inner_folds: int = 5
    random_folds: int = 5
    length_boundaries: List[int] = field(default_factory=lambda: [250, 500, 1000])
    include_top5: Optional[bool] = None  # None: on for adults and children, off for neonates
    base_methods: List[str] = field(default_factory=list)  # empty: every available method


@dataclass
class ExperimentConfig:
    """A complete run description."""

    age_group: str = 'adult'
    seed: int = DEFAULT_SEED
    output_dir: str = 'output'
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthSection = field(default_factory=SynthSection)
    llm: LlmClientConfig = field(default_factory=LlmClientConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    @property
    def age(self) -> AgeGroup:
        return AgeGroup.parse(self.age_group)

    @property
    def records_path(self) -> str:
        return self.data.records or os.path.join(self.output_dir, 'records.csv')

    @property
    def embeddings_path(self) -> str:
        if self.data.embeddings:
            return self.data.embeddings
        suffix = 'bin' if self.synth.embedding_format == 'bin' else 'csv'
        return os.path.join(self.output_dir, f"embeddings.{suffix}")

    @property
    def llm_predictions_path(self) -> str:
        return self.data.llm_predictions or os.path.join(self.output_dir, 'llm_predictions.jsonl')

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)

    def validate(self):
        try:
            AgeGroup.parse(self.age_group)
        except ValidationError as e:
            raise ConfigError(str(e)) from None
        if self.evaluation.split_mode not in ('loso', 'random'):
            raise ConfigError(f"evaluation.split_mode must be 'loso' or 'random', got {self.evaluation.split_mode!r}")
        if self.evaluation.inner_folds < 2 or self.evaluation.random_folds < 2:
            raise ConfigError("evaluation.inner_folds and evaluation.random_folds must be >= 2")
        if not self.models.lambda_grid or any(lam < 0 for lam in self.models.lambda_grid):
            raise ConfigError("models.lambda_grid must be a nonempty list of nonnegative values")
        if not 0 < self.ensemble.grid_step <= 1:
            raise ConfigError("ensemble.grid_step must lie in (0, 1]")
        if not 1 <= self.calibration.top_n <= 5:
            raise ConfigError("calibration.top_n must lie in 1..5")
        if self.synth.embedding_format not in ('csv', 'bin'):
            raise ConfigError("synth.embedding_format must be 'csv' or 'bin'")
        try:
            self.llm.validate()
        except ValidationError as e:
            raise ConfigError(str(e)) from None


_NESTED = {
    (ExperimentConfig, 'data'): DataConfig,
    (ExperimentConfig, 'synth'): SynthSection,
    (ExperimentConfig, 'llm'): LlmClientConfig,
    (ExperimentConfig, 'models'): ModelConfig,
    (ExperimentConfig, 'ensemble'): EnsembleConfig,
    (ExperimentConfig, 'calibration'): CalibrationConfig,
    (ExperimentConfig, 'evaluation'): EvaluationConfig,
}


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown config keys at {where or 'top level'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        path = f"{where}.{name}" if where else name
        nested = _NESTED.get((cls, name))
        if nested is not None:
            kwargs[name] = _build(nested, value, path)
        elif cls is SynthSection and name == 'sites':
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected a list of sites")
            kwargs[name] = [_build(SiteSection, item, f"{path}[{i}]") for i, item in enumerate(value)]
        else:
            kwargs[name] = value
    return cls(**kwargs)


def apply_overrides(raw: Dict, overrides: Sequence[str]) -> Dict:
    """
    Apply `a.b.c=value` overrides to a raw config mapping.

    Values are parsed as YAML scalars, so `0.1`, `true` and `[1, 2]` keep their types.
    """
    for item in overrides:
        if '=' not in item:
            raise ConfigError(f"Override {item!r} must look like key.path=value")
        key, value = item.split('=', 1)
        parts = [p for p in key.strip().split('.') if p]
        if not parts:
            raise ConfigError(f"Override {item!r} has an empty key")
        node = raw
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"Override {item!r}: {part} is not a section")
            node = child
        try:
            node[parts[-1]] = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ConfigError(f"Override {item!r}: {e}") from None
    return raw


def _resolve(path: Optional[str], base: str) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base, path))


def config_from_dict(raw: Dict, base_dir: str = '.') -> ExperimentConfig:
    """Build and validate a config; relative data paths resolve against base_dir."""
    config = _build(ExperimentConfig, raw or {}, '')
    data = config.data
    data.records = _resolve(data.records, base_dir)
    data.embeddings = _resolve(data.embeddings, base_dir)
    data.llm_predictions = _resolve(data.llm_predictions, base_dir)
    data.symptom_labels = _resolve(data.symptom_labels, base_dir)
    data.external_predictions = [_resolve(p, base_dir) for p in data.external_predictions]
    config.validate()
    return config


def load_raw_config(path: Optional[str]) -> Dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """
    Load a YAML or JSON config file and apply overrides.

    Args:
        path: Config file, or None for all defaults
        overrides: `key.path=value` strings applied after the file

    Returns:
        Validated ExperimentConfig
    """
    raw = apply_overrides(load_raw_config(path), overrides)
    base_dir = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    return config_from_dict(raw, base_dir)
