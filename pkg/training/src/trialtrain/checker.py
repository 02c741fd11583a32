"""Pair-classifier training for the checker slot."""

import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from trialtrain import artifact as art
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.data import read_checker_rows
from trialtrain.encoder import PairScorer

logger = logging.getLogger(__name__)


def train_checker(config: TrainConfig) -> "CheckerArtifact":
    if config.checker_file is None:
        raise ConfigError("checker training needs checker_file")
    rows = read_checker_rows(config.checker_file)
    if not rows:
        raise ConfigError("checker training file has no rows")
    n_pos = sum(1 for r in rows if r.label)
    if n_pos == 0 or n_pos == len(rows):
        raise ConfigError("checker training needs both label classes")

    torch.manual_seed(config.seed)
    model = PairScorer(config.base_model, config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    bce = nn.BCEWithLogitsLoss()
    trajectory: list[float] = []
    final_loss = None
    for epoch in range(config.epochs):
        rng = random.Random(config.seed * 1_000_003 + epoch)
        order = list(rows)
        rng.shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            logits = model.logits([(r.summary_text, r.space_text)
                                   for r in batch])
            target = torch.tensor([float(r.label) for r in batch])
            loss = bce(logits, target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())
            trajectory.append(loss.item())
        final_loss = sum(epoch_losses) / len(epoch_losses)
        logger.debug("epoch %d bce=%.4f", epoch, final_loss)

    manifest = {
        "format_version": 1,
        "kind": "checker",
        "base_model": config.base_model,
        "dimension": config.dimension,
        "n_buckets": model.n_buckets,
        "seed": config.seed,
        "config_fingerprint": config.fingerprint(),
        "n_examples": len(rows),
        "n_positive": n_pos,
        "final_loss": final_loss,
        "trajectory_sha256": art.trajectory_hash(trajectory),
    }
    art.save_artifact(config.output_dir, manifest, model.state_dict())
    return CheckerArtifact(config.output_dir, manifest, model)


@dataclass
class CheckerArtifact:
    """Servable pair checker: (summary, space) texts to probabilities."""

    path: Path
    manifest: dict
    model: PairScorer

    @classmethod
    def load(cls, path) -> "CheckerArtifact":
        manifest = art.read_manifest(path)
        model = PairScorer(manifest["base_model"], manifest["seed"],
                           manifest["n_buckets"])
        model.load_state_dict(art.load_state(path))
        model.eval()
        return cls(Path(path), manifest, model)

    def score_batch(self, pairs) -> list[float]:
        if not pairs:
            return []
        with torch.no_grad():
            probs = torch.sigmoid(self.model.logits(list(pairs)))
        return [float(p) for p in probs]
