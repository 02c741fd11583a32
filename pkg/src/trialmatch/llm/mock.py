"""Deterministic offline chat provider.

MockChatProvider answers every template from the shared oncology lexicon,
keyed on the request's template metadata: the same template and bindings
always produce byte-identical text, so the whole pipeline (and its golden
outputs) runs offline and reproducibly. Responses are shaped like plausible
model output, not like real clinical judgment.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Mapping

from .. import lexicon
from .providers import LlmRequest, LlmResponse

_SYMPTOMS = ("fatigue", "weight loss", "shortness of breath", "back pain",
             "abdominal discomfort", "persistent cough")
_SCAN_VERBS = ("demonstrates", "shows", "reveals")
_FILLER = (
    "The patient enjoys gardening and walks daily.",
    "Family accompanied the patient to the visit today.",
    "The weather made travel to clinic difficult this week.",
    "The patient asked about parking validation.",
)


def _seed_rng(template_id: str, bindings: dict) -> random.Random:
    blob = template_id + "\n" + json.dumps(
        bindings, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    digest = hashlib.sha256(blob.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _display(types: list[str]) -> str:
    return ", ".join(types) if types else "not documented"


def _gen_space_extraction(bindings: dict, rng: random.Random) -> str:
    trial = bindings["trial"]
    types = lexicon.find_cancer_types(trial)
    if not types:
        return ("1. Cancer type allowed: any solid tumor. "
                "Cancer burden allowed: advanced.")
    items = []
    for i, name in enumerate(types, 1):
        info = lexicon.CANCER_TYPES[name]
        found_hist = lexicon.find_keywords(trial, info["histologies"])
        histology = found_hist[0] if found_hist else rng.choice(info["histologies"])
        found_burden = lexicon.find_keywords(trial, lexicon.BURDENS)
        burden = found_burden[0] if found_burden else "metastatic"
        parts = [
            f"{i}. Cancer type allowed: {name}.",
            f"Histology allowed: {histology}.",
            f"Cancer burden allowed: {burden}.",
        ]
        found_treat = lexicon.find_keywords(trial, info["treatments"])
        if found_treat:
            parts.append(f"Prior treatment required: {found_treat[0]}.")
        found_bio = lexicon.find_keywords(trial, info["biomarkers"])
        if found_bio:
            parts.append(f"Biomarkers required: {', '.join(found_bio)}.")
        items.append(" ".join(parts))
    return "\n\n".join(items)


def _gen_patient_summarization(bindings: dict, rng: random.Random) -> str:
    excerpt = bindings["excerpt"]
    types = lexicon.find_cancer_types(excerpt)
    hists = []
    bios = []
    treats = []
    for name in types:
        info = lexicon.CANCER_TYPES[name]
        hists += lexicon.find_keywords(excerpt, info["histologies"])
        bios += lexicon.find_keywords(excerpt, info["biomarkers"])
        treats += lexicon.find_keywords(excerpt, info["treatments"])
    burdens = lexicon.find_keywords(excerpt, lexicon.BURDENS)
    lines = [
        f"Cancer type: {_display(types)}.",
        f"Histology: {_display(sorted(set(hists)))}.",
        f"Current extent: {_display(burdens)}.",
        f"Biomarkers: {_display(sorted(set(bios)))}.",
        f"Treatment history: {_display(sorted(set(treats)))}.",
    ]
    return "\n".join(lines)


def _gen_reasonable_consideration(bindings: dict, rng: random.Random) -> str:
    trial_types = set(lexicon.find_cancer_types(bindings["trial_summary"]))
    patient_types = set(lexicon.find_cancer_types(bindings["patient_summary"]))
    shared = sorted(trial_types & patient_types)
    basket = "solid tumor" in bindings["trial_summary"].casefold()
    if shared:
        return (f"The patient's documented {shared[0]} fits the trial's "
                f"allowed cancer type. Yes!")
    if basket and patient_types:
        return ("The trial allows any solid tumor and the patient has a "
                "documented solid malignancy. Yes!")
    return ("The trial's allowed cancer types do not include the patient's "
            "documented disease. No!")


def _gen_oncotree_organ(bindings: dict, rng: random.Random) -> str:
    text = bindings["text"]
    if "solid tumor" in text.casefold():
        return "Solid tumor"
    types = lexicon.find_cancer_types(text)
    if not types:
        return "None"
    if len(types) > 1:
        return "Multiple"
    return lexicon.CANCER_TYPES[types[0]]["organ"]


def _gen_synth_note(bindings: dict, rng: random.Random) -> str:
    cancer = bindings["cancer_type"]
    info = lexicon.CANCER_TYPES.get(cancer)
    if info is None:
        return (f"Chief complaint: follow-up of {cancer}.\n"
                f"Assessment and plan: continue surveillance.")
    histology = rng.choice(info["histologies"])
    biomarker = rng.choice(info["biomarkers"])
    treatments = rng.sample(info["treatments"], 2)
    burden = rng.choice(lexicon.BURDENS)
    stage = rng.choice(("II", "III", "IV"))
    year = rng.randint(2018, 2022)
    lines = [
        f"Chief complaint: {rng.choice(_SYMPTOMS)}.",
        f"Oncologic history: The patient was diagnosed with {cancer} "
        f"in {year}, stage {stage} at diagnosis.",
        f"Biopsy confirmed {histology}.",
        f"Molecular testing showed {biomarker}.",
        f"Disease is currently {burden}.",
        f"Prior treatment history includes {treatments[0]} and "
        f"{treatments[1]}.",
        "Past medical history: hypertension, hyperlipidemia.",
        "Physical exam: ECOG performance status 1, vital signs stable.",
        "Laboratory values: CBC and chemistries within normal limits.",
        rng.choice(_FILLER),
        f"Assessment and plan: continue {treatments[0]}, repeat imaging "
        f"in 3 months.",
    ]
    return "\n".join(lines)


def _gen_synth_imaging(bindings: dict, rng: random.Random) -> str:
    cancer = bindings["cancer_type"]
    scan = bindings.get("scan_type", "CT")
    info = lexicon.CANCER_TYPES.get(cancer)
    organ = info["organ"] if info else "chest"
    burden = rng.choice(lexicon.BURDENS)
    verb = rng.choice(_SCAN_VERBS)
    lines = [
        f"Examination: {scan}.",
        f"Findings: The study {verb} findings compatible with {burden} "
        f"{cancer} involving the {organ.lower()} region.",
        "No acute osseous abnormality.",
        rng.choice(_FILLER),
        f"Impression: {burden} {cancer}, as above.",
    ]
    return "\n".join(lines)


def _gen_synth_pathology(bindings: dict, rng: random.Random) -> str:
    cancer = bindings["cancer_type"]
    info = lexicon.CANCER_TYPES.get(cancer)
    if info is None:
        return f"Diagnosis: malignant neoplasm, favor {cancer}."
    histology = rng.choice(info["histologies"])
    biomarker = rng.choice(info["biomarkers"])
    lines = [
        "Specimen: core needle biopsy.",
        f"Diagnosis: {histology}, consistent with {cancer}.",
        f"Ancillary studies: {biomarker} detected.",
        "Margins cannot be assessed on this specimen.",
    ]
    return "\n".join(lines)


def _gen_synth_history(bindings: dict, rng: random.Random) -> str:
    cancer = bindings["cancer_type"]
    info = lexicon.CANCER_TYPES.get(cancer)
    if info is None:
        return f"01/15/2020: Diagnosed with {cancer}."
    histology = rng.choice(info["histologies"])
    biomarker = rng.choice(info["biomarkers"])
    treatments = rng.sample(info["treatments"], 2)
    year = rng.randint(2018, 2021)
    stage = rng.choice(("II", "III", "IV"))

    def d(month: int, yr: int) -> str:
        return f"{month:02d}/{rng.randint(1, 28):02d}/{yr}"

    lines = [
        f"{d(1, year)}: Diagnosed with stage {stage} {cancer}; biopsy "
        f"showed {histology}.",
        f"{d(2, year)}: Molecular profiling demonstrated {biomarker}.",
        f"{d(3, year)}: Started {treatments[0]}.",
        f"{d(9, year)}: Imaging showed progression with metastatic spread.",
        f"{d(10, year)}: Switched to {treatments[1]}.",
        f"{d(4, year + 1)}: Stable disease on surveillance imaging.",
    ]
    return "\n".join(lines)


_GENERATORS = {
    "space_extraction": _gen_space_extraction,
    "patient_summarization": _gen_patient_summarization,
    "reasonable_consideration": _gen_reasonable_consideration,
    "oncotree_organ": _gen_oncotree_organ,
    "synth_note": _gen_synth_note,
    "synth_imaging": _gen_synth_imaging,
    "synth_pathology": _gen_synth_pathology,
    "synth_history": _gen_synth_history,
}


@dataclass
class MockChatProvider:
    """Offline provider: deterministic fixture text per (template, bindings).

    Requires template metadata on the request; the gateway always attaches
    it. Pure and thread-safe.
    """

    def complete(self, request: LlmRequest) -> LlmResponse:
        if request.template_id is None:
            raise ValueError(
                "MockChatProvider needs request.template_id; route calls "
                "through the gateway helpers")
        generator = _GENERATORS.get(request.template_id)
        if generator is None:
            raise ValueError(f"unknown template {request.template_id!r}")
        bindings = dict(request.bindings or ())
        text = generator(bindings, _seed_rng(request.template_id, bindings))
        prompt_tokens = sum(len(m.content.split()) for m in request.messages)
        return LlmResponse(
            text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=len(text.split()),
            latency_s=0.0,
        )


def fixture_text(template_id: str, bindings: Mapping[str, str],
                 rng: random.Random) -> str:
    """Fixture body for a template under a caller-supplied RNG.

    Lets synthetic-data tooling draw varied per-call text from the same
    generators MockChatProvider uses deterministically per bindings.
    """
    generator = _GENERATORS.get(template_id)
    if generator is None:
        raise ValueError(f"unknown template {template_id!r}")
    return generator(dict(bindings), rng)


@dataclass
class ScriptedChatProvider:
    """Test helper: returns canned responses in order, then raises."""

    responses: list[str]

    def __post_init__(self):
        self.calls: list[LlmRequest] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.calls.append(request)
        if not self.responses:
            raise AssertionError("ScriptedChatProvider ran out of responses")
        return LlmResponse(text=self.responses.pop(0))
