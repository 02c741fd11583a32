"""Two-stage matcher: cosine retrieval, then a pair checker over the top k.

Retrieval ranks the whole eligible side of the index; the checker runs
only on the k retrieved candidates. Candidates keep their retrieval order
and rank regardless of checker outcome, so callers can show the full list
or just the survivors.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol, Sequence, runtime_checkable

import httpx

from .datamodel import PatientSummary, TrialSpace
from .embedding import EmbeddingProvider, VectorCache, embed, text_hash
from .errors import CheckerError, ContractViolationError, TransportError
from .lexicon import find_cancer_types
from .vector_index import QueryFilter, Side, VectorIndex, merge_filters

DEFAULT_PATIENT_K = 10
DEFAULT_SPACE_K = 20
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class MatchCandidate:
    """One retrieved pairing. rank is the 1-based pre-checker position."""

    query_ref: str
    item_ref: str
    rank: int
    cosine: float
    checker_prob: Optional[float] = None
    passed: bool = True


@runtime_checkable
class PairChecker(Protocol):
    """Scores (patient summary text, space text) pairs.

    score_batch returns one probability in [0, 1] per input pair, same
    order. Implementations must be pure per pair: batch and single calls
    agree.
    """

    def score_batch(self,
                    pairs: Sequence[tuple[str, str]]) -> list[float]: ...


_WORD_RE = re.compile(r"[a-z0-9]+")


class MockPairChecker:
    """Deterministic offline checker built from lexical overlap.

    A shared cancer type scores 0.95. A space that accepts any solid
    tumor scores 0.75 for any patient with a recognized cancer type.
    Everything else scores token-set Jaccard similarity capped at 0.4,
    so it never crosses the default 0.5 threshold. The same rules drive
    the mock chat provider's yes/no answers, so the two stay consistent.
    """

    def score(self, summary_text: str, space_text: str) -> float:
        patient_types = set(find_cancer_types(summary_text))
        space_types = set(find_cancer_types(space_text))
        if patient_types & space_types:
            return 0.95
        if "solid tumor" in space_text.lower() and patient_types:
            return 0.75
        a = set(_WORD_RE.findall(summary_text.lower()))
        b = set(_WORD_RE.findall(space_text.lower()))
        if not a or not b:
            return 0.0
        return 0.4 * len(a & b) / len(a | b)

    def score_batch(self,
                    pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(s, t) for s, t in pairs]


class RemotePairChecker:
    """Checker backed by a scoring service.

    POSTs {"pairs": [[summary, space], ...]} to <base_url>/score_pairs
    and expects {"probabilities": [...]} of equal length.
    """

    def __init__(self, base_url: str, *, timeout_s: float = 120.0,
                 max_retries: int = 3, backoff_base_s: float = 0.5):
        self._base_url = base_url.rstrip("/")
        self._timeout_s = timeout_s
        self._max_retries = max_retries
        self._backoff_base_s = backoff_base_s

    def score_batch(self,
                    pairs: Sequence[tuple[str, str]]) -> list[float]:
        payload = {"pairs": [[s, t] for s, t in pairs]}
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                time.sleep(self._backoff_base_s * 2 ** (attempt - 1))
            try:
                response = httpx.post(f"{self._base_url}/score_pairs",
                                      json=payload,
                                      timeout=self._timeout_s)
                if response.status_code in (429, 500, 502, 503, 504):
                    last_error = TransportError(
                        f"score_pairs returned {response.status_code}")
                    continue
                response.raise_for_status()
                probs = response.json()["probabilities"]
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            return _validated_probs(probs, len(pairs))
        raise TransportError(
            f"score_pairs failed after {self._max_retries + 1} attempts"
        ) from last_error


def _validated_probs(probs, expected: int) -> list[float]:
    if len(probs) != expected:
        raise ContractViolationError(
            f"checker returned {len(probs)} probabilities for "
            f"{expected} pairs")
    out = []
    for p in probs:
        p = float(p)
        if not math.isfinite(p) or not 0.0 <= p <= 1.0:
            raise ContractViolationError(
                f"checker probability {p!r} outside [0, 1]")
        out.append(p)
    return out


@dataclass
class MatchEngine:
    """Matcher over an index snapshot.

    space_texts and summary_texts map index item ids to the text the
    checker sees (space raw_text, summary text). Stateless per query,
    so concurrent calls over the same snapshot are safe.
    """

    index: VectorIndex
    provider: EmbeddingProvider
    space_texts: Mapping[str, str] = field(default_factory=dict)
    summary_texts: Mapping[str, str] = field(default_factory=dict)
    checker: Optional[PairChecker] = None
    threshold: float = DEFAULT_THRESHOLD
    cache: Optional[VectorCache] = None

    def match_patient(self,
                      summary: PatientSummary,
                      k: int = DEFAULT_PATIENT_K,
                      *,
                      query_filter: Optional[QueryFilter] = None,
                      checker: Optional[PairChecker] = None,
                      threshold: Optional[float] = None,
                      ) -> list[MatchCandidate]:
        """Top-k trial spaces for one patient.

        Unless the caller's filter already pins a date, only spaces whose
        trial was open on the summary's anchor date are eligible.
        """
        vector = embed([summary.text], self.provider, self.cache)[0]
        f = merge_filters(query_filter, temporal_as_of=summary.anchor_date)
        hits = self.index.top_k(vector, Side.SPACE, k, f)
        candidates = self._as_candidates(summary.ref.item_id(), hits)
        return self._check(candidates, checker, threshold,
                           lambda c: (summary.text,
                                      self._text(self.space_texts, c.item_ref,
                                                 "space")))

    def match_space(self,
                    space: TrialSpace,
                    k: int = DEFAULT_SPACE_K,
                    *,
                    query_filter: Optional[QueryFilter] = None,
                    checker: Optional[PairChecker] = None,
                    threshold: Optional[float] = None,
                    ) -> list[MatchCandidate]:
        """Top-k patients for one trial space.

        The space must already be indexed; its stored vector is the query
        and its trial's open window bounds eligible patient anchor dates,
        unless the caller's filter already sets a window.
        """
        item = self.index.get(Side.SPACE, space.space_id)
        if item is None:
            raise ContractViolationError(
                f"space {space.space_id} is not in the index")
        window = (item.metadata.open_date, item.metadata.close_date)
        f = merge_filters(query_filter, anchor_window=window)
        hits = self.index.top_k(item.vector, Side.PATIENT, k, f)
        candidates = self._as_candidates(space.space_id, hits)
        return self._check(candidates, checker, threshold,
                           lambda c: (self._text(self.summary_texts,
                                                 c.item_ref, "summary"),
                                      space.raw_text))

    def match_space_text(self,
                         space_text: str,
                         k: int = DEFAULT_SPACE_K,
                         *,
                         query_filter: Optional[QueryFilter] = None,
                         checker: Optional[PairChecker] = None,
                         threshold: Optional[float] = None,
                         ) -> list[MatchCandidate]:
        """Top-k patients for unindexed space text, embedded on the fly.

        No trial is known, so no anchor window applies unless the
        caller's filter sets one.
        """
        vector = embed([space_text], self.provider, self.cache)[0]
        hits = self.index.top_k(vector, Side.PATIENT, k, query_filter)
        candidates = self._as_candidates(f"text:{text_hash(space_text)[:16]}",
                                         hits)
        return self._check(candidates, checker, threshold,
                           lambda c: (self._text(self.summary_texts,
                                                 c.item_ref, "summary"),
                                      space_text))

    @staticmethod
    def _as_candidates(query_ref: str,
                       hits: list[tuple[str, float]]) -> list[MatchCandidate]:
        return [MatchCandidate(query_ref=query_ref, item_ref=item_id,
                               rank=rank, cosine=score)
                for rank, (item_id, score) in enumerate(hits, start=1)]

    @staticmethod
    def _text(texts: Mapping[str, str], item_ref: str, kind: str) -> str:
        try:
            return texts[item_ref]
        except KeyError:
            raise ContractViolationError(
                f"no {kind} text registered for {item_ref}") from None

    def _check(self, candidates, checker, threshold, pair_of):
        checker = checker if checker is not None else self.checker
        if checker is None or not candidates:
            return candidates
        threshold = self.threshold if threshold is None else threshold
        pairs = [pair_of(c) for c in candidates]
        try:
            probs = _validated_probs(checker.score_batch(pairs),
                                     len(pairs))
        except ContractViolationError:
            raise
        except Exception as exc:
            raise CheckerError(f"pair checker failed: {exc}",
                               partial=candidates) from exc
        return [MatchCandidate(query_ref=c.query_ref, item_ref=c.item_ref,
                               rank=c.rank, cosine=c.cosine,
                               checker_prob=p, passed=p >= threshold)
                for c, p in zip(candidates, probs)]


def surviving(candidates: Sequence[MatchCandidate]) -> list[MatchCandidate]:
    """Candidates that passed the checker, retrieval order preserved."""
    return [c for c in candidates if c.passed]


def result_count_stats(
        results_per_query: Sequence[Sequence[MatchCandidate]],
) -> tuple[int, float]:
    """(median, mean) surviving-candidate count across queries.

    Median uses the lower-median convention: for even n it is the smaller
    of the two middle values, so it is always an observed count.
    """
    if not results_per_query:
        raise ValueError("need at least one query's results")
    counts = sorted(len(surviving(r)) for r in results_per_query)
    median = counts[(len(counts) - 1) // 2]
    mean = sum(counts) / len(counts)
    return median, mean
