"""Synthetic corpus generation: per-patient progress notes, imaging and
pathology reports, and a chronological history, assembled into the
standard record files.

Patient documents come from the four pinned generation prompts. The
history doubles as the condensed medical record that gets summarized;
its mm/dd/yyyy event dates provide the date spine for the other
documents, with a seeded fallback when none parse. Synthetic ids use the
"synth_" prefix so they can never collide with real-corpus ids.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence

from .condenser import (
    CondensedRecord,
    LexiconTagger,
    condense,
    write_condensed_records,
)
from .datamodel import ClinicalDocument, Corpus, DocType, SummarySource, save_corpus
from .errors import EmptyRecordError, SummarizationError, TransportError
from .lexicon import CANCER_TYPES
from .llm import (
    ChatProvider,
    DEFAULT_MODEL,
    LlmRequest,
    LlmResponse,
    fixture_text,
    generate_synthetic_text,
    summarize_patient,
)

logger = logging.getLogger("trialmatch.synthgen")

SYNTH_PREFIX = "synth_"

DEFAULT_SCAN_TYPES = (
    "CT chest abdomen pelvis with contrast",
    "PET-CT skull base to mid-thigh",
    "MRI brain with and without contrast",
    "CT chest without contrast",
)

_HISTORY_DATE_RE = re.compile(r"\b(\d{2})/(\d{2})/(\d{4})\b")

# offsets used when a generated history yields no parseable dates
_FALLBACK_IMAGING_DAYS = 45
_FALLBACK_NOTE_DAYS = 90


@dataclass(frozen=True)
class SynthSpec:
    """Generation recipe: how many patients, of what, under which seed."""

    n_patients: int
    cancer_type_distribution: tuple[tuple[str, float], ...] = tuple(
        (name, 1.0) for name in CANCER_TYPES)
    scan_type_pool: tuple[str, ...] = DEFAULT_SCAN_TYPES
    seed: int = 0
    model: str = DEFAULT_MODEL

    def __post_init__(self) -> None:
        if self.n_patients < 0:
            raise ValueError("n_patients must be >= 0")
        dist = tuple((str(t), float(w)) for t, w in self.cancer_type_distribution)
        if not dist:
            raise ValueError("cancer_type_distribution must be non-empty")
        if any(w <= 0 for _, w in dist):
            raise ValueError("distribution weights must be positive")
        if not self.scan_type_pool:
            raise ValueError("scan_type_pool must be non-empty")
        object.__setattr__(self, "cancer_type_distribution", dist)
        object.__setattr__(self, "scan_type_pool", tuple(self.scan_type_pool))

    def to_file(self, path) -> None:
        payload = {
            "n_patients": self.n_patients,
            "cancer_type_distribution": [[t, w] for t, w in
                                         self.cancer_type_distribution],
            "scan_type_pool": list(self.scan_type_pool),
            "seed": self.seed,
            "model": self.model,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "SynthSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            n_patients=raw["n_patients"],
            cancer_type_distribution=tuple(
                (t, w) for t, w in raw["cancer_type_distribution"]),
            scan_type_pool=tuple(raw["scan_type_pool"]),
            seed=raw.get("seed", 0),
            model=raw.get("model", DEFAULT_MODEL),
        )


@dataclass(frozen=True)
class SyntheticHistory:
    """Chronological event history; the synthetic condensed record."""

    patient_id: str
    text: str
    event_dates: tuple[date, ...]


@dataclass(frozen=True)
class SyntheticPatient:
    patient_id: str
    cancer_type: str
    scan_type: str
    documents: tuple[ClinicalDocument, ...]
    history: SyntheticHistory


@dataclass(frozen=True)
class AssembleResult:
    out_dir: str
    n_patients: int
    n_documents: int
    n_condensed: int
    n_summaries: int
    skipped: tuple[tuple[str, str], ...] = ()


class SamplingMockProvider:
    """Offline provider with per-call variation.

    The plain mock returns one fixed body per (template, bindings), which
    would make every same-cancer-type patient textually identical. This
    wrapper draws from the same fixture generators but folds a seeded call
    counter into the RNG, so repeated calls vary while a fresh provider
    with the same seed replays the identical sequence.
    """

    def __init__(self, seed: int = 0):
        self._seed = seed
        self._calls = 0
        self._lock = threading.Lock()

    def complete(self, request: LlmRequest) -> LlmResponse:
        if request.template_id is None:
            raise ValueError("SamplingMockProvider needs request.template_id")
        with self._lock:
            call_index = self._calls
            self._calls += 1
        key = json.dumps([self._seed, call_index, request.template_id,
                          sorted(request.bindings or ())])
        text = fixture_text(request.template_id, dict(request.bindings or ()),
                            random.Random(key))
        return LlmResponse(text=text,
                           completion_tokens=len(text.split()))


def parse_history_dates(text: str) -> tuple[date, ...]:
    """Distinct mm/dd/yyyy dates in a history, sorted; bad dates skipped."""
    found = set()
    for mm, dd, yyyy in _HISTORY_DATE_RE.findall(text):
        try:
            found.add(date(int(yyyy), int(mm), int(dd)))
        except ValueError:
            continue
    return tuple(sorted(found))


def _document_dates(history_dates: Sequence[date],
                    seed_key: str) -> tuple[date, date, date]:
    """(pathology, imaging, note) dates from the history's event spine."""
    if history_dates:
        return (history_dates[0],
                history_dates[len(history_dates) // 2],
                history_dates[-1])
    rng = random.Random(seed_key)
    base = date(2018, 1, 1) + timedelta(days=rng.randrange(4 * 365))
    return (base,
            base + timedelta(days=_FALLBACK_IMAGING_DAYS),
            base + timedelta(days=_FALLBACK_NOTE_DAYS))


def _generate_text(template_id: str, bindings: Mapping[str, str],
                   provider: ChatProvider, model: str) -> str:
    """One template call with a single retry on transport failure."""
    try:
        return generate_synthetic_text(template_id, bindings, provider,
                                       model=model)
    except TransportError:
        logger.warning("retrying %s after transport failure", template_id)
        return generate_synthetic_text(template_id, bindings, provider,
                                       model=model)


def generate_patient(patient_id: str, cancer_type: str, scan_type: str,
                     provider: ChatProvider, seed: int = 0, *,
                     model: str = DEFAULT_MODEL) -> SyntheticPatient:
    """Four generated artifacts for one hypothetical patient.

    Three typed documents (note, imaging, pathology) plus the
    chronological history. Document dates come from the history's first,
    middle, and last event dates, or from the seed when none parse.
    """
    if not patient_id.startswith(SYNTH_PREFIX):
        raise ValueError(f"synthetic ids must start with {SYNTH_PREFIX!r}")
    history_text = _generate_text("synth_history", {"cancer_type": cancer_type},
                                  provider, model)
    note_text = _generate_text("synth_note", {"cancer_type": cancer_type},
                               provider, model)
    imaging_text = _generate_text(
        "synth_imaging", {"cancer_type": cancer_type, "scan_type": scan_type},
        provider, model)
    pathology_text = _generate_text("synth_pathology",
                                    {"cancer_type": cancer_type},
                                    provider, model)
    event_dates = parse_history_dates(history_text)
    pathology_date, imaging_date, note_date = _document_dates(
        event_dates, f"{seed}:{patient_id}")
    documents = (
        ClinicalDocument(patient_id, DocType.PATHOLOGY_REPORT,
                         pathology_date, pathology_text),
        ClinicalDocument(patient_id, DocType.IMAGING_REPORT,
                         imaging_date, imaging_text),
        ClinicalDocument(patient_id, DocType.ONCOLOGIST_NOTE,
                         note_date, note_text),
    )
    return SyntheticPatient(
        patient_id=patient_id, cancer_type=cancer_type, scan_type=scan_type,
        documents=documents,
        history=SyntheticHistory(patient_id, history_text, event_dates))


def generate_cohort(spec: SynthSpec, provider: ChatProvider,
                    ) -> tuple[list[SyntheticPatient], list[tuple[str, str]]]:
    """All patients for a spec, in id order; failures skipped with log."""
    rng = random.Random(spec.seed)
    types = [t for t, _ in spec.cancer_type_distribution]
    weights = [w for _, w in spec.cancer_type_distribution]
    assignments = rng.choices(types, weights=weights, k=spec.n_patients)
    patients: list[SyntheticPatient] = []
    skipped: list[tuple[str, str]] = []
    for i, cancer_type in enumerate(assignments, start=1):
        patient_id = f"{SYNTH_PREFIX}{i:05d}"
        scan_type = rng.choice(spec.scan_type_pool)
        try:
            patients.append(generate_patient(
                patient_id, cancer_type, scan_type, provider, spec.seed,
                model=spec.model))
        except (TransportError, ValueError) as exc:
            logger.warning("skipping %s: %s", patient_id, exc)
            skipped.append((patient_id, str(exc)))
    return patients, skipped


_HISTORY_SCHEMA = "trialmatch.synthetic_histories"


def _write_schema_lines(path: Path, schema: str, rows: list[dict]) -> None:
    lines = [json.dumps({"schema": schema, "version": 1},
                        sort_keys=True, separators=(",", ":"))]
    lines.extend(json.dumps(row, sort_keys=True, separators=(",", ":"))
                 for row in rows)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def assemble_corpus(spec: SynthSpec, provider: ChatProvider, out_dir, *,
                    condense_threshold: float = 0.5) -> AssembleResult:
    """Generate a cohort and write the full record-file set under out_dir.

    Documents land in the standard record files; the lexicon-tagged
    condenser derives a condensed record from each patient's documents
    (condensed.jsonl); the history is summarized into the patient summary
    file. Partial failures are skipped and reported in the result.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    patients, skipped = generate_cohort(spec, provider)

    documents: list[ClinicalDocument] = []
    condensed: list[CondensedRecord] = []
    history_rows: list[dict] = []
    summaries = []
    n_condensed = 0
    for patient in patients:
        documents.extend(patient.documents)
        as_of = max(d.date for d in patient.documents)
        try:
            record = condense(list(patient.documents), LexiconTagger(),
                              condense_threshold, as_of)
            condensed.append(record)
            n_condensed += 1
        except EmptyRecordError:
            logger.warning("no sentence survived condensing for %s",
                           patient.patient_id)
            skipped.append((patient.patient_id, "condense: empty record"))
        history_rows.append({
            "patient_id": patient.patient_id,
            "cancer_type": patient.cancer_type,
            "event_dates": [d.isoformat() for d in patient.history.event_dates],
            "text": patient.history.text,
        })
        anchor = (patient.history.event_dates[-1]
                  if patient.history.event_dates else as_of)
        try:
            summaries.append(summarize_patient(
                CondensedRecord(patient.patient_id, anchor,
                                patient.history.text),
                provider, source=SummarySource.STANDARD_OF_CARE,
                model=spec.model))
        except (SummarizationError, TransportError) as exc:
            logger.warning("summary failed for %s: %s", patient.patient_id, exc)
            skipped.append((patient.patient_id, f"summarize: {exc}"))

    save_corpus(Corpus(documents=documents, summaries=summaries), out)
    write_condensed_records(condensed, out / "condensed.jsonl")
    _write_schema_lines(out / "histories.jsonl", _HISTORY_SCHEMA, history_rows)
    return AssembleResult(
        out_dir=str(out), n_patients=len(patients),
        n_documents=len(documents), n_condensed=n_condensed,
        n_summaries=len(summaries), skipped=tuple(skipped))
