"""Condense a patient's documents to concept-relevant sentences.

The pipeline's first stage: split each document into sentences, score every
sentence with a pluggable tagger, keep the ones whose any-concept score
clears the threshold, and join the survivors chronologically under
per-document date headers.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import httpx

from . import lexicon
from .datamodel import ClinicalDocument
from .errors import CorpusParseError, EmptyRecordError, TransportError

# Periods after these tokens never end a sentence.
ABBREVIATIONS = frozenset({
    "dr", "pt", "vs", "mr", "mrs", "ms", "etc", "eg", "ie", "st", "approx",
})

# TNM staging fragments ("T2a.N0.M0", "pT3.") keep their trailing periods.
_STAGE_TOKEN_RE = re.compile(r"^p?[TNM]\d{1,2}[a-z]?$")

_TAGGER_BATCH = 256


@dataclass(frozen=True)
class Sentence:
    """One segmented sentence with its provenance offsets."""

    patient_id: str
    doc_index: int
    doc_date: date
    seq: int
    char_start: int
    char_end: int
    text: str


@dataclass(frozen=True)
class TagScores:
    """Per-concept relevance scores plus the any-concept score."""

    cancer_type: float
    histology: float
    stage_at_diagnosis: float
    current_extent: float
    treatment_history: float
    biomarkers: float
    any_tag: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} score {value} outside [0,1]")

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "TagScores":
        if len(row) != 7:
            raise ValueError(f"tagger row has {len(row)} scores, wanted 7")
        return cls(*[float(v) for v in row])


@dataclass
class CondensedRecord:
    patient_id: str
    as_of_date: date
    text: str
    retained_refs: list[Sentence] = field(default_factory=list)


@runtime_checkable
class SentenceTagger(Protocol):
    """Scoring contract: sentence strings in, aligned 7-float rows out.

    Row order matches lexicon.CONCEPT_ORDER with any_tag last.
    """

    def score(self, texts: Sequence[str]) -> list[Sequence[float]]: ...


def _token_before(text: str, idx: int) -> str:
    start = idx
    while start > 0 and text[start - 1].isalnum():
        start -= 1
    return text[start:idx]


def segment(document: ClinicalDocument, doc_index: int = 0) -> list[Sentence]:
    """Split a document into sentences.

    Boundaries are ., !, or ? followed by whitespace or end of text, and
    every newline. Exceptions: periods after the clinical abbreviations and
    after TNM stage tokens never split, and a period not followed by
    whitespace (decimals, "T2a.N0") never splits. Sentence spans are
    disjoint, ordered, and cover all non-whitespace text.
    """
    text = document.text
    if not text.strip():
        raise ValueError("cannot segment an empty document")
    sentences: list[Sentence] = []

    def emit(start: int, end: int) -> None:
        sentences.append(Sentence(
            patient_id=document.patient_id,
            doc_index=doc_index,
            doc_date=document.date,
            seq=len(sentences),
            char_start=start,
            char_end=end,
            text=text[start:end],
        ))

    start: Optional[int] = None
    last_nonws = -1
    for i, ch in enumerate(text):
        if ch == "\n":
            if start is not None:
                emit(start, last_nonws + 1)
                start = None
            continue
        if not ch.isspace():
            if start is None:
                start = i
            last_nonws = i
        if start is None or ch not in ".!?":
            continue
        nxt = text[i + 1] if i + 1 < len(text) else ""
        if nxt and not nxt.isspace():
            continue
        if ch == ".":
            token = _token_before(text, i)
            if token.lower() in ABBREVIATIONS:
                continue
            if _STAGE_TOKEN_RE.match(token):
                continue
        emit(start, i + 1)
        start = None
    if start is not None:
        emit(start, last_nonws + 1)
    return sentences


def tag(sentences: Sequence[Sentence], tagger: SentenceTagger) -> list[TagScores]:
    """Score sentences in batches, preserving order.

    Tagger failures propagate as TransportError naming the failed batch.
    """
    out: list[TagScores] = []
    texts = [s.text for s in sentences]
    for batch_no, lo in enumerate(range(0, len(texts), _TAGGER_BATCH)):
        chunk = texts[lo:lo + _TAGGER_BATCH]
        try:
            rows = tagger.score(chunk)
        except Exception as exc:
            raise TransportError(
                f"sentence tagger failed on batch {batch_no}: {exc}") from exc
        if len(rows) != len(chunk):
            raise TransportError(
                f"sentence tagger returned {len(rows)} rows for "
                f"{len(chunk)} sentences in batch {batch_no}")
        out.extend(TagScores.from_row(row) for row in rows)
    return out


class LexiconTagger:
    """Bundled offline tagger: keyword-list membership, scores 0 or 1."""

    def score(self, texts: Sequence[str]) -> list[Sequence[float]]:
        rows = []
        for text in texts:
            lowered = text.lower()
            row = [1.0 if any(k in lowered for k in lexicon.CONCEPT_KEYWORDS[c])
                   else 0.0
                   for c in lexicon.CONCEPT_ORDER]
            row.append(max(row))
            rows.append(row)
        return rows


@dataclass
class RemoteTagger:
    """Tagger backed by a scoring service: POST /score with sentence
    strings, aligned 7-float rows back."""

    base_url: str
    timeout_s: float = 60.0

    def score(self, texts: Sequence[str]) -> list[Sequence[float]]:
        try:
            resp = httpx.post(f"{self.base_url.rstrip('/')}/score",
                              json={"sentences": list(texts)},
                              timeout=self.timeout_s)
            resp.raise_for_status()
            return resp.json()["scores"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise TransportError(f"tagger service call failed: {exc}") from exc


def select_threshold(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """The observed score maximizing F1 of (score >= threshold) vs labels.

    Ties go to the LOWEST such threshold. Needs at least one positive and
    one negative label.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels must align")
    positives = sum(1 for l in labels if l)
    if positives == 0 or positives == len(labels):
        raise ValueError("threshold selection needs both label classes")
    best_t = None
    best_f1 = -1.0
    for t in sorted(set(scores)):
        tp = fp = 0
        for s, l in zip(scores, labels):
            if s >= t:
                if l:
                    tp += 1
                else:
                    fp += 1
        fn = positives - tp
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        if f1 > best_f1:
            best_f1, best_t = f1, t
    return best_t


def condense(documents: Sequence[ClinicalDocument],
             tagger: SentenceTagger,
             threshold: float,
             as_of_date: date) -> CondensedRecord:
    """Retain every sentence scoring any_tag >= threshold from documents
    dated on or before as_of_date, joined chronologically with one
    "[YYYY-MM-DD doc_type]" header per contributing document.

    EmptyRecordError when nothing survives; the caller decides whether
    that patient-date anchor is skippable.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0,1]")
    if not documents:
        raise EmptyRecordError("no documents supplied")
    patient_ids = {d.patient_id for d in documents}
    if len(patient_ids) != 1:
        raise ValueError(
            f"documents span multiple patients: {sorted(patient_ids)}")
    patient_id = documents[0].patient_id

    eligible = [(i, d) for i, d in enumerate(documents)
                if d.date <= as_of_date]
    if not eligible:
        raise EmptyRecordError(
            f"no documents for {patient_id} on or before {as_of_date}")
    eligible.sort(key=lambda pair: (pair[1].date, pair[0]))

    per_doc: list[tuple[ClinicalDocument, list[Sentence]]] = []
    flat: list[Sentence] = []
    for idx, doc in eligible:
        sents = segment(doc, doc_index=idx)
        per_doc.append((doc, sents))
        flat.extend(sents)
    scores = tag(flat, tagger)
    keep = {id(s) for s, sc in zip(flat, scores) if sc.any_tag >= threshold}

    lines: list[str] = []
    retained: list[Sentence] = []
    for doc, sents in per_doc:
        kept = [s for s in sents if id(s) in keep]
        if not kept:
            continue
        lines.append(f"[{doc.date.isoformat()} {doc.doc_type.value}]")
        lines.extend(s.text for s in kept)
        retained.extend(kept)
    if not retained:
        raise EmptyRecordError(
            f"no sentence cleared threshold {threshold} for {patient_id}")
    return CondensedRecord(
        patient_id=patient_id,
        as_of_date=as_of_date,
        text="\n".join(lines),
        retained_refs=retained,
    )


CONDENSED_SCHEMA = "trialmatch.condensed_records"


def write_condensed_records(records: Sequence[CondensedRecord],
                            path: Path | str) -> None:
    """JSONL with a schema header; retained_refs are in-memory provenance
    and are not persisted. Atomic replace, canonical key order."""
    path = Path(path)
    lines = [json.dumps({"schema": CONDENSED_SCHEMA, "version": 1},
                        sort_keys=True, separators=(",", ":"))]
    lines.extend(json.dumps({"patient_id": r.patient_id,
                             "as_of_date": r.as_of_date.isoformat(),
                             "text": r.text},
                            sort_keys=True, separators=(",", ":"))
                 for r in records)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_condensed_records(path: Path | str) -> list[CondensedRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CorpusParseError(str(path), 0, "empty condensed-record file")
    header = json.loads(lines[0])
    if header.get("schema") != CONDENSED_SCHEMA:
        raise CorpusParseError(
            str(path), 1, f"schema {header.get('schema')!r}, "
            f"wanted {CONDENSED_SCHEMA!r}")
    records = []
    for n, line in enumerate(lines[1:], start=2):
        row = json.loads(line)
        try:
            records.append(CondensedRecord(
                patient_id=row["patient_id"],
                as_of_date=date.fromisoformat(row["as_of_date"]),
                text=row["text"]))
        except (KeyError, ValueError) as exc:
            raise CorpusParseError(str(path), n, str(exc)) from exc
    return records
