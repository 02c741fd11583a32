"""Text embedding layer: provider abstraction, normalization, vector cache.

Every vector leaving this module is L2-normalized, stored float32, and
scored with float64 accumulation. The offline mock construction is
documented to the bit so other implementations can reproduce it.
"""

from __future__ import annotations

import hashlib
import re
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from .datamodel import fnv1a64
from .errors import ContractViolationError, TransportError

_NORM_TOLERANCE = 1e-5


@dataclass(eq=False)
class EmbeddingVector:
    """Unit vector (float32) plus the hash of the text it came from."""

    values: np.ndarray
    source_hash: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.values.flags.writeable = False

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return (self.source_hash == other.source_hash
                and np.array_equal(self.values, other.values))


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@runtime_checkable
class EmbeddingProvider(Protocol):
    dimension: int

    def embed_batch(self, texts: Sequence[str]) -> list[Sequence[float]]: ...


class MockEmbeddingProvider:
    """Deterministic token-hash bag embedder, dimension 256.

    Construction, exactly: lowercase the text and take the tokens matched
    by [a-z0-9]+, with multiplicity. For each token occurrence, seed
    numpy's default_rng with the FNV-1a 64-bit hash of the token's UTF-8
    bytes, draw standard_normal(dimension), and scale it to unit length.
    Sum these per-token unit vectors in float64. A text with no tokens
    falls back to the vector seeded by the empty string. The caller
    (embed) normalizes the sum and stores float32.
    """

    def __init__(self, dimension: int = 256):
        self.dimension = dimension

    def _token_vector(self, token: str) -> np.ndarray:
        rng = np.random.default_rng(fnv1a64(token.encode("utf-8")))
        v = rng.standard_normal(self.dimension)
        return v / np.linalg.norm(v)

    def embed_batch(self, texts: Sequence[str]) -> list[Sequence[float]]:
        out = []
        for text in texts:
            tokens = re.findall(r"[a-z0-9]+", text.lower())
            if not tokens:
                out.append(self._token_vector(""))
                continue
            acc = np.zeros(self.dimension, dtype=np.float64)
            for token in tokens:
                acc += self._token_vector(token)
            out.append(acc)
        return out


@dataclass
class RemoteEmbeddingProvider:
    """Embedding service client: batch texts in, float rows out.

    The service declares its dimension; the first response pins it.
    """

    base_url: str
    dimension: int = 0  # learned from the first response when left 0
    timeout_s: float = 120.0

    def embed_batch(self, texts: Sequence[str]) -> list[Sequence[float]]:
        try:
            resp = httpx.post(f"{self.base_url.rstrip('/')}/embed",
                              json={"texts": list(texts)},
                              timeout=self.timeout_s)
            resp.raise_for_status()
            doc = resp.json()
            vectors = doc["vectors"]
            declared = int(doc["dimension"])
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise TransportError(f"embedding service call failed: {exc}") from exc
        if self.dimension == 0:
            self.dimension = declared
        elif declared != self.dimension:
            raise ContractViolationError(
                f"embedding service changed dimension: {declared} != "
                f"{self.dimension}")
        return vectors


class VectorCache:
    """Append-only binary vector cache.

    Layout: header = magic "TMVC", version byte 1, uint32 LE dimension,
    uint16 LE provider-id length, provider-id UTF-8 bytes. Each record =
    32 raw bytes of the text's SHA-256 + dimension float32 LE values.
    A cache file binds one (provider id, dimension) pair.
    """

    _MAGIC = b"TMVC"

    def __init__(self, path: Path | str, provider_id: str, dimension: int):
        self.path = Path(path)
        self.provider_id = provider_id
        self.dimension = dimension
        self._lock = threading.Lock()
        self._vectors: dict[str, np.ndarray] = {}
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "wb") as fh:
                fh.write(self._header())

    def _header(self) -> bytes:
        pid = self.provider_id.encode("utf-8")
        return (self._MAGIC + bytes([1])
                + struct.pack("<I", self.dimension)
                + struct.pack("<H", len(pid)) + pid)

    def _load(self) -> None:
        blob = self.path.read_bytes()
        if blob[:4] != self._MAGIC or blob[4] != 1:
            raise ContractViolationError(
                f"{self.path} is not a version-1 vector cache")
        dim = struct.unpack_from("<I", blob, 5)[0]
        pid_len = struct.unpack_from("<H", blob, 9)[0]
        pid = blob[11:11 + pid_len].decode("utf-8")
        if dim != self.dimension or pid != self.provider_id:
            raise ContractViolationError(
                f"{self.path} was built for provider {pid!r} dim {dim}, "
                f"not {self.provider_id!r} dim {self.dimension}")
        offset = 11 + pid_len
        record = 32 + 4 * dim
        while offset + record <= len(blob):
            digest = blob[offset:offset + 32].hex()
            values = np.frombuffer(blob, dtype="<f4", count=dim,
                                   offset=offset + 32)
            self._vectors[digest] = values
            offset += record

    def get(self, source_hash: str) -> Optional[np.ndarray]:
        with self._lock:
            return self._vectors.get(source_hash)

    def put(self, source_hash: str, values: np.ndarray) -> None:
        with self._lock:
            if source_hash in self._vectors:
                return
            self._vectors[source_hash] = np.asarray(values, dtype="<f4")
            with open(self.path, "ab") as fh:
                fh.write(bytes.fromhex(source_hash))
                fh.write(self._vectors[source_hash].tobytes())

    def __len__(self) -> int:
        with self._lock:
            return len(self._vectors)


def embed(texts: Sequence[str],
          provider: EmbeddingProvider,
          cache: Optional[VectorCache] = None) -> list[EmbeddingVector]:
    """Embed texts, order-aligned, L2-normalizing whatever the provider
    returns. Cached texts never reach the provider."""
    for text in texts:
        if not isinstance(text, str) or not text:
            raise ValueError("embed() requires non-empty strings")
    hashes = [text_hash(t) for t in texts]

    resolved: dict[str, np.ndarray] = {}
    if cache is not None:
        for h in set(hashes):
            hit = cache.get(h)
            if hit is not None:
                resolved[h] = hit

    pending: list[tuple[str, str]] = []
    seen = set(resolved)
    for text, h in zip(texts, hashes):
        if h not in seen:
            seen.add(h)
            pending.append((text, h))
    if pending:
        rows = provider.embed_batch([t for t, _ in pending])
        if len(rows) != len(pending):
            raise ContractViolationError(
                f"provider returned {len(rows)} vectors for "
                f"{len(pending)} texts")
        for (text, h), row in zip(pending, rows):
            values = np.asarray(row, dtype=np.float64)
            if values.ndim != 1 or values.shape[0] != provider.dimension:
                raise ContractViolationError(
                    f"provider vector has shape {values.shape}, expected "
                    f"({provider.dimension},)")
            norm = np.linalg.norm(values)
            if norm == 0.0 or not np.isfinite(norm):
                raise ContractViolationError(
                    "provider returned a zero or non-finite vector")
            normalized = (values / norm).astype(np.float32)
            resolved[h] = normalized
            if cache is not None:
                cache.put(h, normalized)
    return [EmbeddingVector(values=resolved[h], source_hash=h)
            for h in hashes]


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of unit vectors, accumulated in float64."""
    if a.dimension != b.dimension:
        raise ValueError(
            f"dimension mismatch: {a.dimension} != {b.dimension}")
    return float(np.dot(a.values.astype(np.float64),
                        b.values.astype(np.float64)))
