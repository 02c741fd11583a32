"""Token-hash models: a shared embedding-bag backbone and small heads.

Base weights are a pure function of (base model id, seed), so an
untrained artifact reproduces the base model exactly and two runs with
one seed start from identical parameters.
"""

from typing import Sequence

import torch
from torch import nn

from trialtrain.config import N_BUCKETS, parse_base_model
from trialtrain.data import HEAD_NAMES, token_buckets


def batch_tensors(texts: Sequence[str], n_buckets: int, salt: str = ""):
    """Flatten texts into (indices, offsets) for an EmbeddingBag."""
    flat: list[int] = []
    offsets: list[int] = []
    for text in texts:
        offsets.append(len(flat))
        flat.extend(token_buckets(text, n_buckets, salt))
    return (torch.tensor(flat, dtype=torch.long),
            torch.tensor(offsets, dtype=torch.long))


class HashBagEncoder(nn.Module):
    """Mean of hashed token vectors followed by a linear map.

    The projection starts as the identity, so the base model is simply
    the token-vector average; training bends both the table and the map.
    """

    def __init__(self, base_model: str, seed: int, n_buckets: int = N_BUCKETS):
        super().__init__()
        self.base_model = base_model
        self.seed = seed
        self.dim = parse_base_model(base_model)
        self.n_buckets = n_buckets
        gen = torch.Generator().manual_seed(seed)
        self.bag = nn.EmbeddingBag(n_buckets, self.dim, mode="mean")
        self.proj = nn.Linear(self.dim, self.dim)
        with torch.no_grad():
            self.bag.weight.copy_(
                torch.randn(n_buckets, self.dim, generator=gen))
            self.proj.weight.copy_(torch.eye(self.dim))
            self.proj.bias.zero_()

    def forward(self, indices: torch.Tensor,
                offsets: torch.Tensor) -> torch.Tensor:
        return self.proj(self.bag(indices, offsets))

    def encode(self, texts: Sequence[str], salt: str = "") -> torch.Tensor:
        indices, offsets = batch_tensors(texts, self.n_buckets, salt)
        return self(indices, offsets)

    def encode_normalized(self, texts: Sequence[str],
                          salt: str = "") -> torch.Tensor:
        vectors = self.encode(texts, salt)
        return nn.functional.normalize(vectors, dim=1, eps=1e-12)


class PairScorer(nn.Module):
    """Binary scorer over (summary, space) pairs.

    The two sides hash with different salts into one table; the head sees
    both side vectors plus their elementwise product, so it can learn
    pair interactions, not just per-side term weights.
    """

    SUMMARY_SALT = "s|"
    SPACE_SALT = "t|"

    def __init__(self, base_model: str, seed: int, n_buckets: int = N_BUCKETS):
        super().__init__()
        self.base_model = base_model
        self.seed = seed
        self.dim = parse_base_model(base_model)
        self.n_buckets = n_buckets
        gen = torch.Generator().manual_seed(seed)
        self.bag = nn.EmbeddingBag(n_buckets, self.dim, mode="mean")
        self.hidden = nn.Linear(3 * self.dim, self.dim)
        self.out = nn.Linear(self.dim, 1)
        with torch.no_grad():
            self.bag.weight.copy_(
                torch.randn(n_buckets, self.dim, generator=gen))
            self.hidden.weight.copy_(torch.randn(
                self.dim, 3 * self.dim, generator=gen) * 0.05)
            self.hidden.bias.zero_()
            self.out.weight.copy_(
                torch.randn(1, self.dim, generator=gen) * 0.05)
            self.out.bias.zero_()

    def logits(self, pairs: Sequence[tuple]) -> torch.Tensor:
        summaries = [p[0] for p in pairs]
        spaces = [p[1] for p in pairs]
        s_idx, s_off = batch_tensors(summaries, self.n_buckets,
                                     self.SUMMARY_SALT)
        t_idx, t_off = batch_tensors(spaces, self.n_buckets, self.SPACE_SALT)
        s_vec = self.bag(s_idx, s_off)
        t_vec = self.bag(t_idx, t_off)
        joined = torch.cat([s_vec, t_vec, s_vec * t_vec], dim=1)
        return self.out(torch.relu(self.hidden(joined))).squeeze(1)


class TaggerNet(nn.Module):
    """Seven sigmoid heads (six concepts plus any_tag) on the backbone."""

    def __init__(self, base_model: str, seed: int, n_buckets: int = N_BUCKETS):
        super().__init__()
        self.base_model = base_model
        self.seed = seed
        self.dim = parse_base_model(base_model)
        self.n_buckets = n_buckets
        gen = torch.Generator().manual_seed(seed)
        self.bag = nn.EmbeddingBag(n_buckets, self.dim, mode="mean")
        self.hidden = nn.Linear(self.dim, self.dim)
        self.heads = nn.Linear(self.dim, len(HEAD_NAMES))
        with torch.no_grad():
            self.bag.weight.copy_(
                torch.randn(n_buckets, self.dim, generator=gen))
            self.hidden.weight.copy_(torch.randn(
                self.dim, self.dim, generator=gen) * 0.05)
            self.hidden.bias.zero_()
            self.heads.weight.copy_(torch.randn(
                len(HEAD_NAMES), self.dim, generator=gen) * 0.05)
            self.heads.bias.zero_()

    def logits(self, texts: Sequence[str]) -> torch.Tensor:
        indices, offsets = batch_tensors(texts, self.n_buckets)
        return self.heads(torch.relu(self.hidden(self.bag(indices, offsets))))
