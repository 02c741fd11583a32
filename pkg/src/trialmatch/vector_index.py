"""Exact top-k cosine retrieval over patient and space vectors.

A full-scan index: vectors per side live in one contiguous matrix, every
query scores all eligible items, and results follow a total order
(descending cosine, then ascending item id) so runs are reproducible on
any platform and thread count.
"""

from __future__ import annotations

import os
import struct
import tempfile
import threading
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .datamodel import Split
from .embedding import EmbeddingVector
from .errors import ConflictError, ContractViolationError


class Side(str, Enum):
    PATIENT = "patient"
    SPACE = "space"


@dataclass(frozen=True)
class ItemMetadata:
    anchor_date: Optional[date] = None
    split: Optional[Split] = None
    nct_id: Optional[str] = None
    open_date: Optional[date] = None
    close_date: Optional[date] = None


@dataclass(frozen=True)
class IndexedItem:
    item_id: str
    side: Side
    vector: EmbeddingVector
    metadata: ItemMetadata


@dataclass(frozen=True)
class QueryFilter:
    """Conjunction of optional predicates.

    temporal_as_of keeps spaces whose open window contains the date (space
    side only). split_in keeps items whose split is in the set. nct_exclude
    drops spaces of the listed trials; patient items are unaffected.
    anchor_window keeps patients whose anchor_date lies in [lo, hi]
    inclusive, hi None meaning unbounded (patient side only).
    """

    temporal_as_of: Optional[date] = None
    split_in: Optional[frozenset] = None
    nct_exclude: Optional[frozenset] = None
    anchor_window: Optional[tuple[date, Optional[date]]] = None


def temporal_pass(item: IndexedItem, as_of: date) -> bool:
    """Is the space's trial open on as_of? Bounds inclusive."""
    meta = item.metadata
    if item.side is not Side.SPACE or meta.open_date is None:
        raise ContractViolationError(
            f"temporal_pass needs a space with an open window, got "
            f"{item.item_id}")
    if as_of < meta.open_date:
        return False
    return meta.close_date is None or as_of <= meta.close_date


def _passes(item: IndexedItem, f: QueryFilter) -> bool:
    if f.temporal_as_of is not None and not temporal_pass(item, f.temporal_as_of):
        return False
    if f.split_in is not None and item.metadata.split not in f.split_in:
        return False
    if f.nct_exclude is not None and item.metadata.nct_id in f.nct_exclude:
        return False
    if f.anchor_window is not None:
        anchor = item.metadata.anchor_date
        if anchor is None:
            raise ContractViolationError(
                f"anchor_window filter needs patient anchor dates, got "
                f"{item.item_id}")
        lo, hi = f.anchor_window
        if anchor < lo or (hi is not None and anchor > hi):
            return False
    return True


_EMPTY_FILTER = QueryFilter()


class VectorIndex:
    """Two-sided exact index. Add items, then query; adds invalidate the
    cached score matrices, so treat a queried index as a snapshot."""

    def __init__(self):
        self._items: dict[Side, list[IndexedItem]] = {
            Side.PATIENT: [], Side.SPACE: []}
        self._ids: dict[Side, set] = {Side.PATIENT: set(), Side.SPACE: set()}
        self._matrices: dict[Side, Optional[np.ndarray]] = {
            Side.PATIENT: None, Side.SPACE: None}
        self._dimension: Optional[int] = None
        self._lock = threading.Lock()

    @classmethod
    def build(cls, items: Iterable[IndexedItem]) -> "VectorIndex":
        index = cls()
        for item in items:
            index.add(item)
        return index

    @property
    def dimension(self) -> Optional[int]:
        return self._dimension

    def add(self, item: IndexedItem) -> None:
        meta = item.metadata
        if item.side is Side.PATIENT:
            if meta.anchor_date is None or meta.split is None:
                raise ContractViolationError(
                    f"patient item {item.item_id} needs anchor_date and split")
        else:
            if meta.nct_id is None or meta.open_date is None:
                raise ContractViolationError(
                    f"space item {item.item_id} needs nct_id and open_date")
        with self._lock:
            if self._dimension is None:
                self._dimension = item.vector.dimension
            elif item.vector.dimension != self._dimension:
                raise ValueError(
                    f"vector dimension {item.vector.dimension} != index "
                    f"dimension {self._dimension}")
            if item.item_id in self._ids[item.side]:
                raise ConflictError(
                    f"duplicate {item.side.value} item {item.item_id}")
            self._ids[item.side].add(item.item_id)
            self._items[item.side].append(item)
            self._matrices[item.side] = None

    def size(self, side: Side) -> int:
        return len(self._items[side])

    def __len__(self) -> int:
        return self.size(Side.PATIENT) + self.size(Side.SPACE)

    def ids(self, side: Side) -> set:
        return set(self._ids[side])

    def items(self, side: Side) -> list[IndexedItem]:
        return list(self._items[side])

    def get(self, side: Side, item_id: str) -> Optional[IndexedItem]:
        for item in self._items[side]:
            if item.item_id == item_id:
                return item
        return None

    def _matrix(self, side: Side) -> np.ndarray:
        with self._lock:
            cached = self._matrices[side]
            if cached is None:
                rows = [i.vector.values for i in self._items[side]]
                cached = (np.stack(rows).astype(np.float64) if rows
                          else np.zeros((0, self._dimension or 0)))
                self._matrices[side] = cached
            return cached

    def top_k(self,
              query: EmbeddingVector,
              side: Side,
              k: int,
              query_filter: Optional[QueryFilter] = None
              ) -> list[tuple[str, float]]:
        """Exact top-k under the filter: descending cosine, ties broken by
        ascending item id, at most min(k, eligible) results."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        items = self._items[side]
        if not items:
            return []
        if query.dimension != self._dimension:
            raise ValueError(
                f"query dimension {query.dimension} != index dimension "
                f"{self._dimension}")
        f = query_filter or _EMPTY_FILTER
        eligible = np.fromiter(
            (i for i, item in enumerate(items) if _passes(item, f)),
            dtype=np.int64)
        if eligible.size == 0:
            return []
        # einsum, not @: BLAS matvec kernels can score bitwise-equal rows
        # differently by position, which would let noise beat the id tie rule
        scores = np.einsum("ij,j->i", self._matrix(side)[eligible],
                           query.values.astype(np.float64))
        ids = np.array([items[i].item_id for i in eligible])
        order = np.lexsort((ids, -scores))[:k]
        return [(str(ids[j]), float(scores[j])) for j in order]

    # ------------------------------------------------------------------
    # Persistence: header = magic "TMIX", version byte 1, uint32 LE
    # dimension, uint32 LE patient count, uint32 LE space count. Records
    # follow, patients first: side byte (0 patient / 1 space), uint16 LE
    # id length + id UTF-8, 32 raw bytes of source hash, a metadata
    # presence byte (bits 0..4 = anchor_date, split, nct_id, open_date,
    # close_date), then each present field (dates as uint32 LE proleptic
    # ordinals, split as one byte indexing train/validation/test, nct_id
    # as uint16 LE length + UTF-8), then dimension float32 LE values.

    _MAGIC = b"TMIX"
    _SPLITS = (Split.TRAIN, Split.VALIDATION, Split.TEST)

    def save(self, path: Path | str) -> None:
        path = Path(path)
        parts = [self._MAGIC, bytes([1]),
                 struct.pack("<III", self._dimension or 0,
                             self.size(Side.PATIENT), self.size(Side.SPACE))]
        for side in (Side.PATIENT, Side.SPACE):
            for item in self._items[side]:
                parts.append(self._pack_item(item))
        blob = b"".join(parts)
        fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                                   suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)

    def _pack_item(self, item: IndexedItem) -> bytes:
        meta = item.metadata
        out = [bytes([0 if item.side is Side.PATIENT else 1])]
        item_id = item.item_id.encode("utf-8")
        out.append(struct.pack("<H", len(item_id)))
        out.append(item_id)
        out.append(bytes.fromhex(item.vector.source_hash))
        flags = ((meta.anchor_date is not None)
                 | (meta.split is not None) << 1
                 | (meta.nct_id is not None) << 2
                 | (meta.open_date is not None) << 3
                 | (meta.close_date is not None) << 4)
        out.append(bytes([flags]))
        if meta.anchor_date is not None:
            out.append(struct.pack("<I", meta.anchor_date.toordinal()))
        if meta.split is not None:
            out.append(bytes([self._SPLITS.index(meta.split)]))
        if meta.nct_id is not None:
            nct = meta.nct_id.encode("utf-8")
            out.append(struct.pack("<H", len(nct)))
            out.append(nct)
        if meta.open_date is not None:
            out.append(struct.pack("<I", meta.open_date.toordinal()))
        if meta.close_date is not None:
            out.append(struct.pack("<I", meta.close_date.toordinal()))
        out.append(item.vector.values.astype("<f4").tobytes())
        return b"".join(out)

    @classmethod
    def load(cls, path: Path | str) -> "VectorIndex":
        blob = Path(path).read_bytes()
        if blob[:4] != cls._MAGIC or blob[4] != 1:
            raise ContractViolationError(
                f"{path} is not a version-1 index file")
        dim, n_patient, n_space = struct.unpack_from("<III", blob, 5)
        index = cls()
        offset = 17
        for _ in range(n_patient + n_space):
            item, offset = cls._unpack_item(blob, offset, dim)
            index.add(item)
        return index

    @classmethod
    def _unpack_item(cls, blob: bytes, offset: int,
                     dim: int) -> tuple[IndexedItem, int]:
        side = Side.PATIENT if blob[offset] == 0 else Side.SPACE
        offset += 1
        id_len = struct.unpack_from("<H", blob, offset)[0]
        offset += 2
        item_id = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        source_hash = blob[offset:offset + 32].hex()
        offset += 32
        flags = blob[offset]
        offset += 1
        anchor_date = split = nct_id = open_date = close_date = None
        if flags & 1:
            anchor_date = date.fromordinal(
                struct.unpack_from("<I", blob, offset)[0])
            offset += 4
        if flags & 2:
            split = cls._SPLITS[blob[offset]]
            offset += 1
        if flags & 4:
            nct_len = struct.unpack_from("<H", blob, offset)[0]
            offset += 2
            nct_id = blob[offset:offset + nct_len].decode("utf-8")
            offset += nct_len
        if flags & 8:
            open_date = date.fromordinal(
                struct.unpack_from("<I", blob, offset)[0])
            offset += 4
        if flags & 16:
            close_date = date.fromordinal(
                struct.unpack_from("<I", blob, offset)[0])
            offset += 4
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
        item = IndexedItem(
            item_id=item_id, side=side,
            vector=EmbeddingVector(values=values, source_hash=source_hash),
            metadata=ItemMetadata(anchor_date=anchor_date, split=split,
                                  nct_id=nct_id, open_date=open_date,
                                  close_date=close_date))
        return item, offset


def merge_filters(base: Optional[QueryFilter],
                  **overrides) -> QueryFilter:
    """Fill unset fields of a filter; explicit fields on `base` win."""
    f = base or _EMPTY_FILTER
    updates = {k: v for k, v in overrides.items()
               if getattr(f, k) is None and v is not None}
    return replace(f, **updates) if updates else f
