"""Dual-objective embedding fine-tuning.

Batches alternate between the ranking objective (in-batch negatives over
(anchor, positive) pairs) and the online contrastive objective (labeled
pairs, hard examples selected within the batch). Either objective can be
dropped by omitting its file or zeroing its weight.
"""

import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from trialtrain import artifact as art
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.data import read_contrastive_pairs, read_ranking_pairs
from trialtrain.encoder import HashBagEncoder

logger = logging.getLogger(__name__)

# softmax temperature for in-batch negatives; fixed, not tunable, so two
# artifacts with one config fingerprint trained the same way
RANKING_SCALE = 20.0


def _chunks(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def ranking_loss(encoder: HashBagEncoder, batch) -> torch.Tensor:
    """Cross-entropy of each anchor against its positive vs the batch."""
    anchors = encoder.encode_normalized([p.anchor_text for p in batch])
    positives = encoder.encode_normalized([p.positive_text for p in batch])
    scores = RANKING_SCALE * anchors @ positives.T
    target = torch.arange(len(batch))
    return nn.functional.cross_entropy(scores, target)


def contrastive_loss(encoder: HashBagEncoder, batch,
                     margin: float) -> torch.Tensor:
    """Squared cosine-distance contrastive loss over hard batch members.

    Hard positives sit farther than the closest negative; hard negatives
    sit closer than the farthest positive. With only one class in the
    batch, every member of it counts.
    """
    anchors = encoder.encode_normalized([p.anchor_text for p in batch])
    candidates = encoder.encode_normalized([p.candidate_text for p in batch])
    distance = 1.0 - (anchors * candidates).sum(dim=1)
    labels = torch.tensor([p.label for p in batch])
    pos_d = distance[labels]
    neg_d = distance[~labels]
    terms = []
    if len(pos_d):
        hard = pos_d[pos_d > neg_d.min()] if len(neg_d) else pos_d
        if not len(hard):
            hard = pos_d
        terms.append(hard.pow(2).sum())
    if len(neg_d):
        hard = neg_d[neg_d < pos_d.max()] if len(pos_d) else neg_d
        if not len(hard):
            hard = neg_d
        terms.append(torch.relu(margin - hard).pow(2).sum())
    return sum(terms) / len(batch)


def train_embedding(config: TrainConfig) -> "EmbeddingArtifact":
    ranking = (read_ranking_pairs(config.ranking_file)
               if config.ranking_file and config.ranking_weight > 0 else [])
    contrastive = (read_contrastive_pairs(config.contrastive_file)
                   if config.contrastive_file
                   and config.contrastive_weight > 0 else [])
    if not ranking and not contrastive:
        raise ConfigError("no training pairs: need a ranking or "
                          "contrastive file with a positive weight")

    torch.manual_seed(config.seed)
    encoder = HashBagEncoder(config.base_model, config.seed)
    optimizer = torch.optim.Adam(encoder.parameters(),
                                 lr=config.learning_rate)
    trajectory: list[float] = []
    final_ranking = final_contrastive = None
    for epoch in range(config.epochs):
        rng = random.Random(config.seed * 1_000_003 + epoch)
        r_order = list(ranking)
        c_order = list(contrastive)
        rng.shuffle(r_order)
        rng.shuffle(c_order)
        # a lone trailing pair has no in-batch negatives; skip it
        r_batches = [b for b in _chunks(r_order, config.batch_size)
                     if len(b) >= 2]
        c_batches = list(_chunks(c_order, config.batch_size))
        epoch_r: list[float] = []
        epoch_c: list[float] = []
        for i in range(max(len(r_batches), len(c_batches))):
            if i < len(r_batches):
                loss = config.ranking_weight * ranking_loss(
                    encoder, r_batches[i])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_r.append(loss.item())
                trajectory.append(loss.item())
            if i < len(c_batches):
                loss = config.contrastive_weight * contrastive_loss(
                    encoder, c_batches[i], config.margin)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_c.append(loss.item())
                trajectory.append(loss.item())
        if epoch_r:
            final_ranking = sum(epoch_r) / len(epoch_r)
        if epoch_c:
            final_contrastive = sum(epoch_c) / len(epoch_c)
        logger.debug("epoch %d ranking=%s contrastive=%s", epoch,
                     final_ranking, final_contrastive)

    manifest = {
        "format_version": 1,
        "kind": "embedding",
        "base_model": config.base_model,
        "dimension": config.dimension,
        "n_buckets": encoder.n_buckets,
        "seed": config.seed,
        "config_fingerprint": config.fingerprint(),
        "n_ranking_pairs": len(ranking),
        "n_contrastive_pairs": len(contrastive),
        "final_ranking_loss": final_ranking,
        "final_contrastive_loss": final_contrastive,
        "trajectory_sha256": art.trajectory_hash(trajectory),
    }
    art.save_artifact(config.output_dir, manifest, encoder.state_dict())
    return EmbeddingArtifact(config.output_dir, manifest, encoder)


@dataclass
class EmbeddingArtifact:
    """Servable embedder; also usable in-process as a batch provider."""

    path: Path
    manifest: dict
    encoder: HashBagEncoder

    @classmethod
    def load(cls, path) -> "EmbeddingArtifact":
        manifest = art.read_manifest(path)
        encoder = HashBagEncoder(manifest["base_model"], manifest["seed"],
                                 manifest["n_buckets"])
        encoder.load_state_dict(art.load_state(path))
        encoder.eval()
        return cls(Path(path), manifest, encoder)

    @property
    def dimension(self) -> int:
        return self.manifest["dimension"]

    def embed_batch(self, texts) -> list[list[float]]:
        with torch.no_grad():
            vectors = self.encoder.encode_normalized(list(texts))
        return [row.tolist() for row in vectors]
