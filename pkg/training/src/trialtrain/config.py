"""Training configuration shared by all three trainers."""

import hashlib
import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    """Invalid configuration or data that makes training meaningless."""


# base model identifiers look like "hash-bag-<dim>"; dim is the embedding
# width and the bucket count is fixed so artifacts stay interchangeable
BASE_MODEL_RE = re.compile(r"^hash-bag-(\d+)$")
N_BUCKETS = 4096


def parse_base_model(identifier: str) -> int:
    """Return the embedding dimension encoded in the identifier."""
    m = BASE_MODEL_RE.match(identifier)
    if not m:
        raise ConfigError(
            f"unknown base model {identifier!r}; expected hash-bag-<dim>")
    dim = int(m.group(1))
    if not 8 <= dim <= 4096:
        raise ConfigError(f"base model dimension {dim} outside [8, 4096]")
    return dim


@dataclass(frozen=True)
class TrainConfig:
    """One config drives any of the three trainers.

    File fields irrelevant to a given trainer are ignored by it. The
    batch size floor of 2 exists for in-batch negatives; the other
    trainers inherit it harmlessly.
    """

    output_dir: Path
    ranking_file: Optional[Path] = None
    contrastive_file: Optional[Path] = None
    checker_file: Optional[Path] = None
    tagger_file: Optional[Path] = None
    base_model: str = "hash-bag-128"
    batch_size: int = 16
    epochs: int = 20
    learning_rate: float = 0.05
    ranking_weight: float = 1.0
    contrastive_weight: float = 1.0
    margin: float = 0.5
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (in-batch negatives)")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.ranking_weight < 0 or self.contrastive_weight < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        parse_base_model(self.base_model)
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        for name in ("ranking_file", "contrastive_file", "checker_file",
                     "tagger_file"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Path(value))

    @property
    def dimension(self) -> int:
        return parse_base_model(self.base_model)

    def fingerprint(self) -> str:
        """Stable hash of everything that affects the trained weights."""
        payload = {}
        for f in fields(self):
            if f.name in ("output_dir", "extra"):
                continue
            value = getattr(self, f.name)
            payload[f.name] = str(value) if isinstance(value, Path) else value
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()
