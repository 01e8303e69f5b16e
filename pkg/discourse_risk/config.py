"""
Training configuration: dataclass defaults, a flat ``key=value`` file, and CLI
overrides, applied in that order.

Example config file::

    # cohesion experiment
    train_src = data/train.src
    train_tgt = data/train.tgt
    rewards = lc_doc
    risk-prob = 1.0
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union, get_type_hints

from .errors import ConfigError
from .lexcohesion import parse_labels
from .risk import RewardSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 1
    epochs: int = 20
    learning_rate: float = 1e-3
    max_batch_sentences: int = 15
    beam: int = 2
    risk_prob: float = 1.0
    rewards: str = "bleu_doc+lc_doc+coh_doc"
    context_sents: int = 0
    annealing_steps: int = 5
    patience: int = 2
    min_improvement: float = 0.001
    validate_every: int = 0
    embed_dim: int = 32
    hidden_dim: int = 64
    max_vocab: int = 5000
    min_freq: int = 1
    max_len: int = 64
    shuffle: bool = True
    pack_documents: bool = False
    lc_denominator: str = "content"
    lc_labels: str = ""
    coh_remove_stopwords: bool = False
    valid_beam: int = 1
    progress: bool = True
    train_src: Optional[str] = None
    train_tgt: Optional[str] = None
    valid_src: Optional[str] = None
    valid_tgt: Optional[str] = None
    relations: Optional[str] = None
    topics: Optional[str] = None
    stoplist: Optional[str] = None
    ckpt_dir: str = "checkpoints"

    @property
    def reward_spec(self) -> RewardSpec:
        return RewardSpec.parse(self.rewards)

    def replace(self, **changes: Any) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def validate(self) -> TrainConfig:
        """Check every invariant; returns self so calls can be chained."""
        positive = (
            "epochs",
            "max_batch_sentences",
            "beam",
            "embed_dim",
            "hidden_dim",
            "patience",
            "min_freq",
            "max_len",
            "valid_beam",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.annealing_steps < 0:
            raise ConfigError(f"annealing_steps must be >= 0, got {self.annealing_steps}")
        if self.validate_every < 0:
            raise ConfigError(f"validate_every must be >= 0, got {self.validate_every}")
        if self.max_vocab < 5:
            raise ConfigError(f"max_vocab must be >= 5, got {self.max_vocab}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.risk_prob <= 1.0:
            raise ConfigError(f"risk_prob must be in [0, 1], got {self.risk_prob}")
        if self.context_sents not in (0, 1):
            raise ConfigError(f"context_sents must be 0 or 1, got {self.context_sents}")
        if self.lc_denominator not in ("content", "all"):
            raise ConfigError(f"lc_denominator must be content or all, got {self.lc_denominator!r}")
        if self.min_improvement < 0:
            raise ConfigError(f"min_improvement must be >= 0, got {self.min_improvement}")
        RewardSpec.parse(self.rewards)
        parse_labels(self.lc_labels)
        return self

    def require_paths(self, *names: str) -> None:
        """Raise ConfigError unless every named path is set and exists."""
        for name in names:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"{name} is not configured")
            if not Path(value).exists():
                raise ConfigError(f"{name} does not exist: {value}")


_FIELD_TYPES: Dict[str, Any] = get_type_hints(TrainConfig)
_FIELD_NAMES = {f.name for f in fields(TrainConfig)}


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def _coerce(name: str, raw: str) -> Any:
    kind = _FIELD_TYPES[name]
    text = raw.strip()
    if kind == Optional[str]:
        return text or None
    if kind is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(text)
    except ValueError as e:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from e


def load_config_file(path: PathLike) -> Dict[str, Any]:
    """
    Parse a flat ``key=value`` file into typed overrides.

    Raises:
        ConfigError: Malformed line or unknown key (with line number).
        FileNotFoundError: The file does not exist.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FileNotFoundError(f"config file not found: {path}") from e

    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        name = _normalize_key(key)
        if name not in _FIELD_NAMES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key.strip()!r}")
        values[name] = _coerce(name, value)
    return values


def build_config(
    config_file: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None
) -> TrainConfig:
    """Defaults, then the config file, then non-None overrides."""
    values: Dict[str, Any] = {}
    if config_file is not None:
        values.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        name = _normalize_key(key)
        if name not in _FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        values[name] = value
    config = TrainConfig(**values)
    logger.debug("config: %s", config)
    return config.validate()
