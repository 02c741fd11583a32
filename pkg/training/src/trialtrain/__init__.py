"""Toy-scale trainers for the matching engine's three model slots.

Consumes the engine's training files (ranking pairs, contrastive pairs,
checker examples, tagger examples) and produces artifact directories that
serve behind the engine's embedding / pair-checker / sentence-tagger HTTP
contracts.
"""

from trialtrain.artifact import load_artifact
from trialtrain.checker import CheckerArtifact, train_checker
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.embedding import EmbeddingArtifact, train_embedding
from trialtrain.tagger import TaggerArtifact, train_tagger

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "TrainConfig",
    "train_embedding",
    "train_checker",
    "train_tagger",
    "EmbeddingArtifact",
    "CheckerArtifact",
    "TaggerArtifact",
    "load_artifact",
    "__version__",
]
