"""Training-dataset assembly: tagger sentences, embedding pairs, and the
checker dataset, all restricted to training-split patients.

Every builder is deterministic given its seed and input order-insensitive
where an order is not inherent: pools are sorted before sampling, so the
same corpus and seed always emit byte-identical files.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .cascade import MatchEngine
from .condenser import segment
from .datamodel import (
    ClinicalDocument,
    Enrollment,
    PatientSummary,
    Split,
    TrialSpace,
    assign_split,
    fnv1a64,
)
from .errors import ContractViolationError, DecisionParseError, LeakageError
from .lexicon import CONCEPT_KEYWORDS, CONCEPT_ORDER
from .llm import ChatMessage, ChatProvider, LlmRequest, check_reasonable
from .vector_index import QueryFilter, Side

logger = logging.getLogger("trialmatch.trainprep")

TAGGER_TRAIN_PERCENT = 89


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class TaggerExample:
    sentence: str
    labels: dict = field(hash=False)
    any_tag: bool
    patient_id: str
    subset: str  # "train" or "validation", the tagger's internal split

    def __post_init__(self):
        if set(self.labels) != set(CONCEPT_ORDER):
            raise ValueError("labels must cover exactly the six concepts")
        if self.any_tag != any(self.labels.values()):
            raise ValueError("any_tag must be the OR of the concept labels")


class Relation(str, Enum):
    POSITIVE_CHECKED = "positive_checked"
    RANDOM_NEGATIVE = "random_negative"
    MINED_LABELED = "mined_labeled"


class Stage(str, Enum):
    STAGE1 = "stage1"
    REFINE = "refine"


@dataclass(frozen=True)
class EmbedPairExample:
    anchor_text: str
    candidate_text: str
    relation: Relation
    label: bool
    stage: Stage
    patient_id: str
    space_id: str
    nct_id: str
    round_tag: str = ""  # "b" or "c" for mined pairs, "" for stage 1

    def __post_init__(self):
        if self.relation is Relation.POSITIVE_CHECKED and not self.label:
            raise ValueError("positive_checked pairs must be labeled true")
        if self.relation is Relation.RANDOM_NEGATIVE and self.label:
            raise ValueError("random negatives must be labeled false")


class Provenance(str, Enum):
    A_ENROLLED = "a_enrolled"
    B_MINED_PRELIM = "b_mined_prelim"
    C_MINED_FINAL = "c_mined_final"


_PROVENANCE_RANK = {Provenance.A_ENROLLED: 0,
                    Provenance.B_MINED_PRELIM: 1,
                    Provenance.C_MINED_FINAL: 2}


@dataclass(frozen=True)
class CheckerExample:
    summary_text: str
    space_text: str
    label: bool
    provenance: Provenance
    patient_id: str
    space_id: str


# ---------------------------------------------------------------------------
# Sentence concept labeling


class ConceptLabeler(Protocol):
    """Labels sentences with the six condenser concepts.

    Returns one dict per sentence mapping concept name to bool, or None
    for a sentence whose labeling output could not be parsed.
    """

    def label_sentences(
            self, sentences: Sequence[str]) -> list[Optional[dict]]: ...


class LexiconConceptLabeler:
    """Keyword-membership labeler; the offline stand-in for the LLM."""

    def label_sentences(self, sentences):
        out = []
        for sentence in sentences:
            lowered = sentence.lower()
            out.append({concept: any(k in lowered
                                     for k in CONCEPT_KEYWORDS[concept])
                        for concept in CONCEPT_ORDER})
        return out


_TAGGING_SYSTEM = (
    "You are reviewing single sentences from oncology medical records. "
    "Decide which of these concepts the sentence mentions: "
    + ", ".join(CONCEPT_ORDER) + ". Respond with a comma-separated list "
    "of the matching concept names, or the single word none.")


class LlmConceptLabeler:
    """Chat-provider-backed labeler for the six concepts.

    The tagging prompt is not one of the pinned templates; responses that
    contain anything outside the concept vocabulary come back as None so
    the caller can skip and count them.
    """

    def __init__(self, provider: ChatProvider,
                 model: str = "trialmatch-default"):
        self._provider = provider
        self._model = model

    def label_sentences(self, sentences):
        out = []
        for sentence in sentences:
            request = LlmRequest(
                model=self._model,
                messages=(ChatMessage("system", _TAGGING_SYSTEM),
                          ChatMessage("user", sentence)),
                max_tokens=64)
            out.append(self._parse(self._provider.complete(request).text))
        return out

    @staticmethod
    def _parse(text: str) -> Optional[dict]:
        cleaned = text.strip().strip(".").lower()
        if cleaned == "none":
            return {concept: False for concept in CONCEPT_ORDER}
        names = [part.strip() for part in cleaned.split(",")]
        if not names or any(name not in CONCEPT_ORDER for name in names):
            return None
        return {concept: concept in names for concept in CONCEPT_ORDER}


def tagger_subset(patient_id: str) -> str:
    """89/11 internal split, hashed per patient like the global split but
    salted so the two partitions are independent."""
    bucket = fnv1a64(f"tagger:{patient_id}".encode("utf-8")) % 100
    return "train" if bucket < TAGGER_TRAIN_PERCENT else "validation"


def build_tagger_dataset(documents: Sequence[ClinicalDocument],
                         labeler: ConceptLabeler,
                         sample_size: int,
                         seed: int) -> list[TaggerExample]:
    """Sample sentences from non-test patients and label their concepts.

    Unparseable labeler output skips the sentence; skips are logged and
    counted in a summary log line.
    """
    if sample_size < 0:
        raise ValueError("sample_size must be >= 0")
    pool: list[tuple[str, str]] = []
    for doc in documents:
        if assign_split(doc.patient_id) is Split.TEST:
            continue
        for sentence in segment(doc):
            pool.append((doc.patient_id, sentence.text))
    n = min(sample_size, len(pool))
    if n < sample_size:
        logger.info("tagger sample capped at %d of %d requested",
                    n, sample_size)
    sampled = random.Random(seed).sample(pool, n)
    rows = labeler.label_sentences([text for _, text in sampled])
    examples = []
    skipped = 0
    for (patient_id, text), labels in zip(sampled, rows):
        if labels is None:
            skipped += 1
            logger.warning("unparseable tag output for sentence %r",
                           text[:60])
            continue
        examples.append(TaggerExample(
            sentence=text, labels=dict(labels),
            any_tag=any(labels.values()), patient_id=patient_id,
            subset=tagger_subset(patient_id)))
    if skipped:
        logger.info("tagger build skipped %d unparseable sentences", skipped)
    return examples


# ---------------------------------------------------------------------------
# Stage-1 embedding pairs


def _summary_lookup(summaries: Sequence[PatientSummary]):
    by_key: dict[tuple, PatientSummary] = {}
    for summary in sorted(summaries,
                          key=lambda s: (s.patient_id,
                                         s.anchor_date.isoformat(),
                                         s.source.value)):
        by_key.setdefault((summary.patient_id, summary.anchor_date), summary)
    return by_key


def build_stage1_pairs(enrollments: Sequence[Enrollment],
                       spaces: Sequence[TrialSpace],
                       summaries: Sequence[PatientSummary],
                       provider: ChatProvider,
                       neg_ratio: float = 1.0,
                       seed: int = 0) -> list[EmbedPairExample]:
    """Enrollment-derived positives plus seeded random negatives.

    Positives are the (summary, enrolled-trial space) pairs that pass the
    reasonable-consideration check. Negatives are sampled uniformly
    without replacement from (summary, space) pairs whose space belongs
    to no trial that patient enrolled on; their count is
    round(neg_ratio * positives). Only training-split patients enter.
    """
    if neg_ratio < 0:
        raise ValueError("neg_ratio must be >= 0")
    spaces_by_nct: dict[str, list[TrialSpace]] = {}
    for space in sorted(spaces, key=lambda s: s.space_id):
        spaces_by_nct.setdefault(space.nct_id, []).append(space)
    summary_by_key = _summary_lookup(summaries)

    enrolled_ncts: dict[str, set] = {}
    for enrollment in enrollments:
        enrolled_ncts.setdefault(enrollment.patient_id,
                                 set()).add(enrollment.nct_id)

    positives: list[EmbedPairExample] = []
    anchors: list[PatientSummary] = []
    anchor_seen: set[tuple] = set()
    ordered = sorted(enrollments, key=lambda e: (e.patient_id, e.nct_id,
                                                 e.enroll_date.isoformat()))
    for enrollment in ordered:
        if assign_split(enrollment.patient_id) is not Split.TRAIN:
            continue
        summary = summary_by_key.get((enrollment.patient_id,
                                      enrollment.enroll_date))
        if summary is None:
            logger.warning("no summary for %s enrolled %s on %s; skipping",
                           enrollment.patient_id, enrollment.enroll_date,
                           enrollment.nct_id)
            continue
        trial_spaces = spaces_by_nct.get(enrollment.nct_id, [])
        if not trial_spaces:
            logger.warning("no spaces for trial %s; skipping enrollment",
                           enrollment.nct_id)
            continue
        anchor_key = (summary.ref.item_id(),)
        if anchor_key not in anchor_seen:
            anchor_seen.add(anchor_key)
            anchors.append(summary)
        for space in trial_spaces:
            try:
                decision = check_reasonable(summary, space, provider)
            except DecisionParseError:
                logger.warning("undecidable pair %s / %s; skipping",
                               summary.ref.item_id(), space.space_id)
                continue
            if decision.value:
                positives.append(EmbedPairExample(
                    anchor_text=summary.text,
                    candidate_text=space.raw_text,
                    relation=Relation.POSITIVE_CHECKED, label=True,
                    stage=Stage.STAGE1, patient_id=summary.patient_id,
                    space_id=space.space_id, nct_id=space.nct_id))

    n_neg = round(neg_ratio * len(positives))
    if n_neg == 0:
        return positives

    sorted_spaces = sorted(spaces, key=lambda s: s.space_id)
    pool = [(summary, space)
            for summary in anchors
            for space in sorted_spaces
            if space.nct_id not in enrolled_ncts[summary.patient_id]]
    if n_neg > len(pool):
        logger.info("negative pool has only %d pairs; requested %d",
                    len(pool), n_neg)
        n_neg = len(pool)
    negatives = [EmbedPairExample(
        anchor_text=summary.text, candidate_text=space.raw_text,
        relation=Relation.RANDOM_NEGATIVE, label=False,
        stage=Stage.STAGE1, patient_id=summary.patient_id,
        space_id=space.space_id, nct_id=space.nct_id)
        for summary, space in random.Random(seed).sample(pool, n_neg)]
    return positives + negatives


# ---------------------------------------------------------------------------
# Hard-negative mining


def mine_hard_negatives(engine: MatchEngine,
                        summaries: Sequence[PatientSummary],
                        spaces: Sequence[TrialSpace],
                        provider: ChatProvider,
                        k_patient: int = 10,
                        k_space: int = 20,
                        round_tag: str = "b") -> list[EmbedPairExample]:
    """Label the retrieval neighborhoods of every training-split patient
    and every space: top k_patient spaces per summary, top k_space
    training summaries per space, each pair labeled by the
    reasonable-consideration check. Pairs found from both directions are
    emitted once.
    """
    if round_tag not in ("b", "c"):
        raise ValueError(f"round_tag must be 'b' or 'c', got {round_tag!r}")
    spaces_by_id = {space.space_id: space for space in spaces}
    summaries_by_item = {s.ref.item_id(): s for s in summaries}
    train_summaries = [
        s for s in sorted(summaries, key=lambda s: s.ref.item_id())
        if assign_split(s.patient_id) is Split.TRAIN]

    seen: set[tuple[str, str]] = set()
    out: list[EmbedPairExample] = []
    skipped = 0

    def emit(summary: PatientSummary, space: TrialSpace) -> None:
        nonlocal skipped
        key = (summary.ref.item_id(), space.space_id)
        if key in seen:
            return
        seen.add(key)
        try:
            decision = check_reasonable(summary, space, provider)
        except DecisionParseError:
            skipped += 1
            logger.warning("undecidable mined pair %s / %s; skipping",
                           key[0], key[1])
            return
        out.append(EmbedPairExample(
            anchor_text=summary.text, candidate_text=space.raw_text,
            relation=Relation.MINED_LABELED, label=decision.value,
            stage=Stage.REFINE, patient_id=summary.patient_id,
            space_id=space.space_id, nct_id=space.nct_id,
            round_tag=round_tag))

    for summary in train_summaries:
        for candidate in engine.match_patient(summary, k=k_patient,
                                              checker=None):
            space = spaces_by_id.get(candidate.item_ref)
            if space is None:
                raise ContractViolationError(
                    f"index returned unknown space {candidate.item_ref}")
            emit(summary, space)

    train_filter = QueryFilter(split_in=frozenset({Split.TRAIN}))
    for space in sorted(spaces, key=lambda s: s.space_id):
        if engine.index.get(Side.SPACE, space.space_id) is None:
            continue
        for candidate in engine.match_space(space, k=k_space,
                                            query_filter=train_filter,
                                            checker=None):
            summary = summaries_by_item.get(candidate.item_ref)
            if summary is None:
                raise ContractViolationError(
                    f"index returned unknown summary {candidate.item_ref}")
            emit(summary, space)

    if skipped:
        logger.info("mining skipped %d undecidable pairs", skipped)
    return out


# ---------------------------------------------------------------------------
# Checker dataset


def build_checker_dataset(stage1: Sequence[EmbedPairExample],
                          mined_b: Sequence[EmbedPairExample],
                          mined_c: Sequence[EmbedPairExample],
                          ) -> list[CheckerExample]:
    """Union of the three sources keyed by (summary text, space text).

    Exact duplicates (same label) keep the earliest provenance; label
    conflicts keep the latest provenance and are logged. Any non-training
    patient in any input is a leakage error.
    """
    tagged = ([(Provenance.A_ENROLLED, e) for e in stage1]
              + [(Provenance.B_MINED_PRELIM, e) for e in mined_b]
              + [(Provenance.C_MINED_FINAL, e) for e in mined_c])
    for provenance, example in tagged:
        if assign_split(example.patient_id) is not Split.TRAIN:
            raise LeakageError(
                f"{provenance.value} example references non-training "
                f"patient {example.patient_id}")

    order: list[tuple[str, str]] = []
    groups: dict[tuple[str, str], list[tuple[Provenance,
                                             EmbedPairExample]]] = {}
    for provenance, example in tagged:
        key = (example.anchor_text, example.candidate_text)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((provenance, example))

    out = []
    for key in order:
        entries = groups[key]
        labels = {example.label for _, example in entries}
        if len(labels) == 1:
            provenance, example = min(
                entries, key=lambda pair: _PROVENANCE_RANK[pair[0]])
        else:
            provenance, example = max(
                entries, key=lambda pair: _PROVENANCE_RANK[pair[0]])
            logger.warning(
                "conflicting labels for %s / %s; keeping %s",
                example.patient_id, example.space_id, provenance.value)
        out.append(CheckerExample(
            summary_text=example.anchor_text,
            space_text=example.candidate_text,
            label=example.label, provenance=provenance,
            patient_id=example.patient_id, space_id=example.space_id))
    return out


# ---------------------------------------------------------------------------
# File formats (line-delimited JSON, header line carries schema + version)


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":"))


def _write_records(path: Path | str, schema: str, records: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_dump_line({"schema": schema, "version": 1})]
    lines.extend(_dump_line(r) for r in records)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_records(path: Path | str, schema: str) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("schema") != schema or header.get("version") != 1:
        raise ValueError(f"{path} is not a version-1 {schema} file")
    return [json.loads(line) for line in lines[1:] if line]


RANKING_SCHEMA = "trialmatch.ranking_pairs"
CONTRASTIVE_SCHEMA = "trialmatch.contrastive_pairs"
CHECKER_SCHEMA = "trialmatch.checker_examples"
TAGGER_SCHEMA = "trialmatch.tagger_examples"


def write_ranking_pairs(examples: Sequence[EmbedPairExample],
                        path: Path | str) -> int:
    """Positives only: (anchor, positive) rows for in-batch-negative
    ranking losses. Returns the row count."""
    rows = [{"anchor_text": e.anchor_text, "positive_text": e.candidate_text,
             "patient_id": e.patient_id, "space_id": e.space_id,
             "nct_id": e.nct_id}
            for e in examples if e.relation is Relation.POSITIVE_CHECKED]
    _write_records(path, RANKING_SCHEMA, rows)
    return len(rows)


def write_contrastive_pairs(examples: Sequence[EmbedPairExample],
                            path: Path | str) -> int:
    rows = [{"anchor_text": e.anchor_text, "candidate_text": e.candidate_text,
             "label": e.label, "relation": e.relation.value,
             "stage": e.stage.value, "round_tag": e.round_tag,
             "patient_id": e.patient_id, "space_id": e.space_id,
             "nct_id": e.nct_id}
            for e in examples]
    _write_records(path, CONTRASTIVE_SCHEMA, rows)
    return len(rows)


def write_checker_examples(examples: Sequence[CheckerExample],
                           path: Path | str) -> int:
    rows = [{"summary_text": e.summary_text, "space_text": e.space_text,
             "label": e.label, "provenance": e.provenance.value,
             "patient_id": e.patient_id, "space_id": e.space_id}
            for e in examples]
    _write_records(path, CHECKER_SCHEMA, rows)
    return len(rows)


def write_tagger_examples(examples: Sequence[TaggerExample],
                          path: Path | str) -> int:
    rows = [{"sentence": e.sentence, "labels": e.labels,
             "any_tag": e.any_tag, "patient_id": e.patient_id,
             "subset": e.subset}
            for e in examples]
    _write_records(path, TAGGER_SCHEMA, rows)
    return len(rows)


def read_contrastive_pairs(path: Path | str) -> list[EmbedPairExample]:
    return [EmbedPairExample(
        anchor_text=r["anchor_text"], candidate_text=r["candidate_text"],
        relation=Relation(r["relation"]), label=r["label"],
        stage=Stage(r["stage"]), patient_id=r["patient_id"],
        space_id=r["space_id"], nct_id=r["nct_id"],
        round_tag=r.get("round_tag", ""))
        for r in _read_records(path, CONTRASTIVE_SCHEMA)]


def read_checker_examples(path: Path | str) -> list[CheckerExample]:
    return [CheckerExample(
        summary_text=r["summary_text"], space_text=r["space_text"],
        label=r["label"], provenance=Provenance(r["provenance"]),
        patient_id=r["patient_id"], space_id=r["space_id"])
        for r in _read_records(path, CHECKER_SCHEMA)]


def read_tagger_examples(path: Path | str) -> list[TaggerExample]:
    return [TaggerExample(
        sentence=r["sentence"], labels=r["labels"], any_tag=r["any_tag"],
        patient_id=r["patient_id"], subset=r["subset"])
        for r in _read_records(path, TAGGER_SCHEMA)]


def scan_training_file(path: Path | str,
                       allowed: frozenset = frozenset({Split.TRAIN}),
                       ) -> int:
    """Leakage guard over an emitted file: every record's patient must
    fall in an allowed split. Returns the number of records scanned."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    count = 0
    for line in lines[1:]:
        if not line:
            continue
        record = json.loads(line)
        patient_id = record.get("patient_id")
        if patient_id is None:
            continue
        count += 1
        split = assign_split(patient_id)
        if split not in allowed:
            raise LeakageError(
                f"{path} references {patient_id} from split {split.value}")
    return count
