"""Multitask sentence-tagger training: six concept heads plus any_tag."""

import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from trialtrain import artifact as art
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.data import HEAD_NAMES, read_tagger_rows
from trialtrain.encoder import TaggerNet

logger = logging.getLogger(__name__)


def train_tagger(config: TrainConfig) -> "TaggerArtifact":
    if config.tagger_file is None:
        raise ConfigError("tagger training needs tagger_file")
    rows = [r for r in read_tagger_rows(config.tagger_file)
            if r.subset == "train"]
    if not rows:
        raise ConfigError("tagger training file has no train-subset rows")

    # a head with no positive examples cannot learn a boundary; drop it
    # from the loss and serve it as 0.0
    enabled = []
    for i, name in enumerate(HEAD_NAMES):
        if any(r.targets[i] == 1.0 for r in rows):
            enabled.append(name)
        else:
            logger.warning("tagger head %s has no positives; disabled", name)
    if not enabled:
        raise ConfigError("every tagger head is empty; nothing to train")
    enabled_idx = torch.tensor([HEAD_NAMES.index(n) for n in enabled])

    torch.manual_seed(config.seed)
    model = TaggerNet(config.base_model, config.seed)
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
            logits = model.logits([r.sentence for r in batch])
            target = torch.tensor([r.targets for r in batch])
            loss = bce(logits[:, enabled_idx], target[:, enabled_idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())
            trajectory.append(loss.item())
        final_loss = sum(epoch_losses) / len(epoch_losses)
        logger.debug("epoch %d bce=%.4f", epoch, final_loss)

    manifest = {
        "format_version": 1,
        "kind": "tagger",
        "base_model": config.base_model,
        "dimension": config.dimension,
        "n_buckets": model.n_buckets,
        "seed": config.seed,
        "config_fingerprint": config.fingerprint(),
        "n_examples": len(rows),
        "enabled_heads": enabled,
        "final_loss": final_loss,
        "trajectory_sha256": art.trajectory_hash(trajectory),
    }
    art.save_artifact(config.output_dir, manifest, model.state_dict())
    return TaggerArtifact(config.output_dir, manifest, model)


@dataclass
class TaggerArtifact:
    """Servable tagger: sentences in, aligned 7-float rows out.

    Heads are independent sigmoids; any_tag is its own head, not the max
    of the concept heads. Disabled heads always score 0.0.
    """

    path: Path
    manifest: dict
    model: TaggerNet

    @classmethod
    def load(cls, path) -> "TaggerArtifact":
        manifest = art.read_manifest(path)
        model = TaggerNet(manifest["base_model"], manifest["seed"],
                          manifest["n_buckets"])
        model.load_state_dict(art.load_state(path))
        model.eval()
        return cls(Path(path), manifest, model)

    def score(self, texts) -> list[list[float]]:
        texts = list(texts)
        if not texts:
            return []
        enabled = set(self.manifest["enabled_heads"])
        mask = [1.0 if name in enabled else 0.0 for name in HEAD_NAMES]
        with torch.no_grad():
            probs = torch.sigmoid(self.model.logits(texts))
            probs = probs * torch.tensor(mask)
        return [row.tolist() for row in probs]
