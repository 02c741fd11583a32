"""Core domain types, patient-level splits, and the line-delimited corpus format.

Record files are JSON lines, one entity type per file, with canonical
serialization (sorted keys, compact separators, records in canonical order)
so that a saved corpus is byte-reproducible. Field names and the split hash
are part of the on-disk contract; see FORMATS.md.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Optional

from .errors import ConflictError, CorpusParseError

NCT_ID_RE = re.compile(r"^NCT\d{8}$")

# FNV-1a 64-bit, the documented split hash.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class DocType(str, Enum):
    ONCOLOGIST_NOTE = "oncologist_note"
    IMAGING_REPORT = "imaging_report"
    PATHOLOGY_REPORT = "pathology_report"


class SummarySource(str, Enum):
    TRIAL_ENROLLMENT = "trial_enrollment"
    STANDARD_OF_CARE = "standard_of_care"
    USER_ENTERED = "user_entered"


class LabelProvenance(str, Enum):
    STAGE1_ENROLLED = "stage1_enrolled"
    STAGE1_RANDOM_NEGATIVE = "stage1_random_negative"
    MINED_ROUND1 = "mined_round1"
    MINED_ROUND2 = "mined_round2"


def assign_split(patient_id: str) -> Split:
    """Deterministic patient-level split assignment.

    Buckets the FNV-1a 64-bit hash of the id mod 100: 0-79 train,
    80-89 validation, 90-99 test. A patient appearing in several datasets
    therefore lands in the same split everywhere.
    """
    if not patient_id:
        raise ValueError("patient_id must be non-empty")
    bucket = fnv1a64(patient_id.encode("utf-8")) % 100
    if bucket < 80:
        return Split.TRAIN
    if bucket < 90:
        return Split.VALIDATION
    return Split.TEST


class SummaryRef(NamedTuple):
    """Identity of one patient summary: who, when, and from which workflow."""

    patient_id: str
    anchor_date: date
    source: SummarySource

    def item_id(self) -> str:
        """Stable string form used as an index item id. Sortable."""
        return f"{self.patient_id}|{self.anchor_date.isoformat()}|{self.source.value}"

    @staticmethod
    def from_item_id(item_id: str) -> "SummaryRef":
        patient_id, anchor, source = item_id.rsplit("|", 2)
        return SummaryRef(patient_id, date.fromisoformat(anchor), SummarySource(source))


@dataclass
class ClinicalDocument:
    patient_id: str
    doc_type: DocType
    date: date
    text: str
    extra: dict = field(default_factory=dict)


@dataclass
class PatientSummary:
    patient_id: str
    anchor_date: date
    source: SummarySource
    text: str
    extra: dict = field(default_factory=dict)

    @property
    def ref(self) -> SummaryRef:
        return SummaryRef(self.patient_id, self.anchor_date, self.source)


@dataclass
class TrialRecord:
    nct_id: str
    eligibility_text: str
    open_date: date
    title: Optional[str] = None
    close_date: Optional[date] = None
    extra: dict = field(default_factory=dict)

    def is_open(self, as_of: date) -> bool:
        """Open-to-accrual test, inclusive on both ends."""
        if as_of < self.open_date:
            return False
        return self.close_date is None or as_of <= self.close_date


# TrialSpace criterion fields, in prompt order. Also the parser's key map.
SPACE_CRITERION_FIELDS = (
    "cancer_type_allowed",
    "histology_allowed",
    "cancer_burden_allowed",
    "prior_treatment_required",
    "prior_treatment_excluded",
    "biomarkers_required",
    "biomarkers_excluded",
)


@dataclass
class TrialSpace:
    """One eligible phenotype of a trial.

    Criterion fields are None (absent) when the extraction did not state
    them, never empty strings. raw_text keeps the full rendered sentence,
    including any keys the parser did not recognize.
    """

    space_id: str
    nct_id: str
    ordinal: int
    raw_text: str
    cancer_type_allowed: Optional[str] = None
    histology_allowed: Optional[str] = None
    cancer_burden_allowed: Optional[str] = None
    prior_treatment_required: Optional[str] = None
    prior_treatment_excluded: Optional[str] = None
    biomarkers_required: Optional[str] = None
    biomarkers_excluded: Optional[str] = None
    extra: dict = field(default_factory=dict)


@dataclass
class Enrollment:
    patient_id: str
    nct_id: str
    enroll_date: date
    extra: dict = field(default_factory=dict)


@dataclass
class PairLabel:
    summary_ref: SummaryRef
    space_id: str
    label: bool
    provenance: LabelProvenance
    rationale_text: Optional[str] = None
    extra: dict = field(default_factory=dict)


@dataclass
class Corpus:
    """Immutable-after-load container for one dataset.

    Safe for concurrent reads; construct on one thread and share.
    """

    documents: list[ClinicalDocument] = field(default_factory=list)
    summaries: list[PatientSummary] = field(default_factory=list)
    trials: list[TrialRecord] = field(default_factory=list)
    spaces: list[TrialSpace] = field(default_factory=list)
    enrollments: list[Enrollment] = field(default_factory=list)
    labels: list[PairLabel] = field(default_factory=list)

    def trial(self, nct_id: str) -> Optional[TrialRecord]:
        return next((t for t in self.trials if t.nct_id == nct_id), None)

    def space(self, space_id: str) -> Optional[TrialSpace]:
        return next((s for s in self.spaces if s.space_id == space_id), None)

    def summary(self, ref: SummaryRef) -> Optional[PatientSummary]:
        return next((s for s in self.summaries if s.ref == ref), None)

    def patient_ids(self) -> set[str]:
        ids = {d.patient_id for d in self.documents}
        ids.update(s.patient_id for s in self.summaries)
        return ids


# ---------------------------------------------------------------------------
# Serialization

FILE_NAMES = {
    "documents": "documents.jsonl",
    "summaries": "summaries.jsonl",
    "trials": "trials.jsonl",
    "spaces": "spaces.jsonl",
    "enrollments": "enrollments.jsonl",
    "labels": "labels.jsonl",
}

_DOC_FIELDS = {"patient_id", "doc_type", "date", "text"}
_SUMMARY_FIELDS = {"patient_id", "anchor_date", "source", "text"}
_TRIAL_FIELDS = {"nct_id", "title", "eligibility_text", "open_date", "close_date"}
_SPACE_FIELDS = {"space_id", "nct_id", "ordinal", "raw_text", *SPACE_CRITERION_FIELDS}
_ENROLLMENT_FIELDS = {"patient_id", "nct_id", "enroll_date"}
_LABEL_FIELDS = {"patient_id", "anchor_date", "source", "space_id", "label",
                 "provenance", "rationale_text"}


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _parse_date(raw, path, line_no, name) -> date:
    try:
        return date.fromisoformat(raw)
    except (TypeError, ValueError):
        raise CorpusParseError(path, line_no, f"invalid {name}: {raw!r}") from None


def _split_known(rec: dict, known: set, path: str, line_no: int, strict: bool) -> dict:
    extra = {k: v for k, v in rec.items() if k not in known}
    if extra and strict:
        raise CorpusParseError(path, line_no, f"unknown fields: {sorted(extra)}")
    return extra


def _doc_to_dict(d: ClinicalDocument) -> dict:
    out = {"patient_id": d.patient_id, "doc_type": d.doc_type.value,
           "date": d.date.isoformat(), "text": d.text}
    out.update(d.extra)
    return out


def _summary_to_dict(s: PatientSummary) -> dict:
    out = {"patient_id": s.patient_id, "anchor_date": s.anchor_date.isoformat(),
           "source": s.source.value, "text": s.text}
    out.update(s.extra)
    return out


def _trial_to_dict(t: TrialRecord) -> dict:
    out = {"nct_id": t.nct_id, "eligibility_text": t.eligibility_text,
           "open_date": t.open_date.isoformat()}
    if t.title is not None:
        out["title"] = t.title
    if t.close_date is not None:
        out["close_date"] = t.close_date.isoformat()
    out.update(t.extra)
    return out


def _space_to_dict(s: TrialSpace) -> dict:
    out = {"space_id": s.space_id, "nct_id": s.nct_id, "ordinal": s.ordinal,
           "raw_text": s.raw_text}
    for name in SPACE_CRITERION_FIELDS:
        value = getattr(s, name)
        if value is not None:
            out[name] = value
    out.update(s.extra)
    return out


def _enrollment_to_dict(e: Enrollment) -> dict:
    out = {"patient_id": e.patient_id, "nct_id": e.nct_id,
           "enroll_date": e.enroll_date.isoformat()}
    out.update(e.extra)
    return out


def _label_to_dict(l: PairLabel) -> dict:
    out = {"patient_id": l.summary_ref.patient_id,
           "anchor_date": l.summary_ref.anchor_date.isoformat(),
           "source": l.summary_ref.source.value,
           "space_id": l.space_id, "label": l.label,
           "provenance": l.provenance.value}
    if l.rationale_text is not None:
        out["rationale_text"] = l.rationale_text
    out.update(l.extra)
    return out


def save_corpus(corpus: Corpus, path) -> None:
    """Write all record files under `path` in canonical order.

    Documents sort stably by (patient_id, date) so same-day documents keep
    their input order; every other file sorts by its primary key.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    docs = sorted(enumerate(corpus.documents),
                  key=lambda p: (p[1].patient_id, p[1].date, p[0]))
    _write_lines(root / FILE_NAMES["documents"], [_doc_to_dict(d) for _, d in docs])

    summaries = sorted(corpus.summaries,
                       key=lambda s: (s.patient_id, s.anchor_date, s.source.value))
    _write_lines(root / FILE_NAMES["summaries"], [_summary_to_dict(s) for s in summaries])

    trials = sorted(corpus.trials, key=lambda t: t.nct_id)
    _write_lines(root / FILE_NAMES["trials"], [_trial_to_dict(t) for t in trials])

    spaces = sorted(corpus.spaces, key=lambda s: (s.nct_id, s.ordinal))
    _write_lines(root / FILE_NAMES["spaces"], [_space_to_dict(s) for s in spaces])

    enrollments = sorted(corpus.enrollments,
                         key=lambda e: (e.patient_id, e.nct_id, e.enroll_date))
    _write_lines(root / FILE_NAMES["enrollments"],
                 [_enrollment_to_dict(e) for e in enrollments])

    labels = sorted(corpus.labels,
                    key=lambda l: (l.summary_ref.patient_id, l.summary_ref.anchor_date,
                                   l.summary_ref.source.value, l.space_id,
                                   l.provenance.value))
    _write_lines(root / FILE_NAMES["labels"], [_label_to_dict(l) for l in labels])


def _write_lines(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dump_line(rec))
            fh.write("\n")


def _read_lines(path: Path):
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(str(path), line_no, f"bad JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise CorpusParseError(str(path), line_no, "record is not an object")
            yield line_no, rec


def load_corpus(path, strict: bool = False) -> Corpus:
    """Load a corpus directory. Missing files load as empty collections.

    strict=True rejects unknown fields; the default preserves them on the
    record's `extra` dict so a round trip is lossless.
    """
    root = Path(path)
    corpus = Corpus()

    p = root / FILE_NAMES["documents"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _DOC_FIELDS, str(p), line_no, strict)
        text = rec.get("text")
        if not text:
            raise CorpusParseError(str(p), line_no, "text must be non-empty")
        try:
            doc_type = DocType(rec.get("doc_type"))
        except ValueError:
            raise CorpusParseError(str(p), line_no,
                                   f"unknown doc_type: {rec.get('doc_type')!r}") from None
        corpus.documents.append(ClinicalDocument(
            patient_id=_require_id(rec, "patient_id", str(p), line_no),
            doc_type=doc_type,
            date=_parse_date(rec.get("date"), str(p), line_no, "date"),
            text=text, extra=extra))

    seen_summary = set()
    p = root / FILE_NAMES["summaries"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _SUMMARY_FIELDS, str(p), line_no, strict)
        if not rec.get("text"):
            raise CorpusParseError(str(p), line_no, "text must be non-empty")
        try:
            source = SummarySource(rec.get("source"))
        except ValueError:
            raise CorpusParseError(str(p), line_no,
                                   f"unknown source: {rec.get('source')!r}") from None
        summary = PatientSummary(
            patient_id=_require_id(rec, "patient_id", str(p), line_no),
            anchor_date=_parse_date(rec.get("anchor_date"), str(p), line_no, "anchor_date"),
            source=source, text=rec["text"], extra=extra)
        key = summary.ref
        if key in seen_summary:
            raise ConflictError(f"{p}:{line_no}: duplicate summary {key}")
        seen_summary.add(key)
        corpus.summaries.append(summary)

    seen_trial = set()
    p = root / FILE_NAMES["trials"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _TRIAL_FIELDS, str(p), line_no, strict)
        nct_id = rec.get("nct_id", "")
        if not NCT_ID_RE.match(nct_id or ""):
            raise CorpusParseError(str(p), line_no, f"invalid nct_id: {nct_id!r}")
        if nct_id in seen_trial:
            raise ConflictError(f"{p}:{line_no}: duplicate trial {nct_id}")
        seen_trial.add(nct_id)
        open_date = _parse_date(rec.get("open_date"), str(p), line_no, "open_date")
        close_date = None
        if "close_date" in rec and rec["close_date"] is not None:
            close_date = _parse_date(rec["close_date"], str(p), line_no, "close_date")
            if open_date > close_date:
                raise CorpusParseError(str(p), line_no, "open_date after close_date")
        corpus.trials.append(TrialRecord(
            nct_id=nct_id, title=rec.get("title"),
            eligibility_text=rec.get("eligibility_text", ""),
            open_date=open_date, close_date=close_date, extra=extra))

    seen_space = set()
    p = root / FILE_NAMES["spaces"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _SPACE_FIELDS, str(p), line_no, strict)
        space_id = rec.get("space_id", "")
        if space_id in seen_space:
            raise ConflictError(f"{p}:{line_no}: duplicate space {space_id}")
        seen_space.add(space_id)
        if not rec.get("raw_text"):
            raise CorpusParseError(str(p), line_no, "raw_text must be non-empty")
        ordinal = rec.get("ordinal")
        if not isinstance(ordinal, int) or ordinal < 1:
            raise CorpusParseError(str(p), line_no, f"invalid ordinal: {ordinal!r}")
        criteria = {}
        for name in SPACE_CRITERION_FIELDS:
            if name in rec and rec[name] is not None:
                if rec[name] == "":
                    raise CorpusParseError(str(p), line_no,
                                           f"{name} must be absent, not empty")
                criteria[name] = rec[name]
        corpus.spaces.append(TrialSpace(
            space_id=space_id, nct_id=_require_id(rec, "nct_id", str(p), line_no),
            ordinal=ordinal, raw_text=rec["raw_text"], extra=extra, **criteria))

    seen_enroll = set()
    p = root / FILE_NAMES["enrollments"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _ENROLLMENT_FIELDS, str(p), line_no, strict)
        enr = Enrollment(
            patient_id=_require_id(rec, "patient_id", str(p), line_no),
            nct_id=_require_id(rec, "nct_id", str(p), line_no),
            enroll_date=_parse_date(rec.get("enroll_date"), str(p), line_no, "enroll_date"),
            extra=extra)
        key = (enr.patient_id, enr.nct_id, enr.enroll_date)
        if key in seen_enroll:
            raise ConflictError(f"{p}:{line_no}: duplicate enrollment {key}")
        seen_enroll.add(key)
        corpus.enrollments.append(enr)

    seen_label = set()
    p = root / FILE_NAMES["labels"]
    for line_no, rec in _read_lines(p):
        extra = _split_known(rec, _LABEL_FIELDS, str(p), line_no, strict)
        try:
            source = SummarySource(rec.get("source"))
            provenance = LabelProvenance(rec.get("provenance"))
        except ValueError as exc:
            raise CorpusParseError(str(p), line_no, str(exc)) from None
        if not isinstance(rec.get("label"), bool):
            raise CorpusParseError(str(p), line_no, "label must be boolean")
        ref = SummaryRef(_require_id(rec, "patient_id", str(p), line_no),
                         _parse_date(rec.get("anchor_date"), str(p), line_no, "anchor_date"),
                         source)
        key = (ref, rec.get("space_id"), provenance)
        if key in seen_label:
            raise ConflictError(f"{p}:{line_no}: duplicate label {key}")
        seen_label.add(key)
        corpus.labels.append(PairLabel(
            summary_ref=ref, space_id=_require_id(rec, "space_id", str(p), line_no),
            label=rec["label"], provenance=provenance,
            rationale_text=rec.get("rationale_text"), extra=extra))

    _check_references(corpus, root)
    return corpus


def _require_id(rec: dict, name: str, path: str, line_no: int) -> str:
    value = rec.get(name)
    if not value or not isinstance(value, str):
        raise CorpusParseError(path, line_no, f"{name} must be a non-empty string")
    return value


def _check_references(corpus: Corpus, root: Path) -> None:
    patients = corpus.patient_ids()
    trials = {t.nct_id for t in corpus.trials}
    for enr in corpus.enrollments:
        if enr.patient_id not in patients:
            raise CorpusParseError(str(root / FILE_NAMES["enrollments"]), 0,
                                   f"enrollment references unknown patient {enr.patient_id}")
        if enr.nct_id not in trials:
            raise CorpusParseError(str(root / FILE_NAMES["enrollments"]), 0,
                                   f"enrollment references unknown trial {enr.nct_id}")
