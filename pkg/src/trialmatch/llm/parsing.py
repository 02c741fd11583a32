"""Parsers turning raw LLM text into typed outputs.

All three parsers are pure functions of the response text. They raise the
typed errors from trialmatch.errors with the offending text attached so
callers can audit failures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from ..errors import DecisionParseError, ExtractionError, OrganVocabularyError

# ---------------------------------------------------------------------------
# Trial space lists

# Numbered item: "N. " at the start of a line. Item body runs to the next
# item or end of text, so items may span lines.
_ITEM_RE = re.compile(r"^(\d+)\.\s+", re.MULTILINE)

# A criterion key is one or two alphabetic words followed by
# allowed/required/excluded and a colon. Greedy second word, so
# "Cancer type allowed:" is caught at "Cancer", not at "type".
_KEY_RE = re.compile(
    r"(?<![A-Za-z])([A-Za-z]+(?:[ \t][A-Za-z]+)?)[ \t]+"
    r"(allowed|required|excluded)[ \t]*:",
    re.IGNORECASE,
)

# (normalized phrase, kind) -> TrialSpace field. Singular/plural tolerated
# where the prompt's own wording wavers. Anything else is an unknown key:
# it still bounds the previous value but sets no field.
_FIELD_MAP = {
    ("cancer type", "allowed"): "cancer_type_allowed",
    ("cancer types", "allowed"): "cancer_type_allowed",
    ("histology", "allowed"): "histology_allowed",
    ("cancer burden", "allowed"): "cancer_burden_allowed",
    ("prior treatment", "required"): "prior_treatment_required",
    ("prior treatments", "required"): "prior_treatment_required",
    ("prior treatment", "excluded"): "prior_treatment_excluded",
    ("prior treatments", "excluded"): "prior_treatment_excluded",
    ("biomarkers", "required"): "biomarkers_required",
    ("biomarker", "required"): "biomarkers_required",
    ("biomarkers", "excluded"): "biomarkers_excluded",
    ("biomarker", "excluded"): "biomarkers_excluded",
}


@dataclass
class ParsedSpace:
    """One numbered item from a space-extraction response."""

    number: int
    raw_text: str
    fields: dict = field(default_factory=dict)


def normalize_space_text(text: str) -> str:
    """Dedup key for spaces: case-folded, whitespace-collapsed raw text."""
    return " ".join(text.casefold().split())


def _clean_value(value: str) -> str:
    value = value.strip()
    if value.endswith("."):
        value = value[:-1].rstrip()
    return value


def _parse_item(number: int, body: str) -> ParsedSpace:
    parsed = ParsedSpace(number=number, raw_text=body.strip())
    keys = list(_KEY_RE.finditer(body))
    for i, match in enumerate(keys):
        phrase = " ".join(match.group(1).casefold().split())
        kind = match.group(2).casefold()
        target = _FIELD_MAP.get((phrase, kind))
        if target is None:
            continue
        value_end = keys[i + 1].start() if i + 1 < len(keys) else len(body)
        value = _clean_value(body[match.end():value_end])
        if value:
            parsed.fields[target] = value
    return parsed


def parse_space_list(text: str) -> list[ParsedSpace]:
    """Parse a numbered trial-space list.

    Grammar: items start with "N. " at the start of a line; within an item,
    "<Field> allowed/required/excluded:" keys introduce values that run to
    the next key or the end of the item. Known keys set the matching
    TrialSpace field (a repeated key overwrites - last one wins); unknown
    keys set nothing but survive in raw_text. Values are stripped of
    surrounding whitespace and one trailing period; a value that is empty
    after cleaning sets no field.

    ExtractionError if no numbered item is found.
    """
    items = list(_ITEM_RE.finditer(text))
    if not items:
        raise ExtractionError("no numbered space items found", raw_text=text)
    spaces = []
    for i, match in enumerate(items):
        body_end = items[i + 1].start() if i + 1 < len(items) else len(text)
        body = text[match.end():body_end]
        spaces.append(_parse_item(int(match.group(1)), body))
    return spaces


# ---------------------------------------------------------------------------
# Reasonable-consideration decisions


@dataclass(frozen=True)
class Decision:
    value: bool
    raw_text: str


_DECISION_RE = re.compile(r"yes!|no!", re.IGNORECASE)


def parse_decision(text: str) -> Decision:
    """Decision = polarity of the LAST "Yes!"/"No!" (case-insensitive).

    The prompt asks for step-by-step reasoning before the final one-word
    answer, so the final token is the authoritative one.
    """
    matches = _DECISION_RE.findall(text)
    if not matches:
        raise DecisionParseError(
            "no Yes!/No! token in response", raw_text=text)
    return Decision(value=matches[-1].casefold() == "yes!", raw_text=text)


# ---------------------------------------------------------------------------
# Organ labels

# The 31 organs offered to the model, in prompt order.
ORGAN_NAMES = (
    "Adrenal Gland", "Ampulla of Vater", "Biliary Tract",
    "Bladder/Urinary Tract", "Bone", "Bowel", "Breast", "Cervix",
    "CNS/Brain", "Esophagus/Stomach", "Eye", "Head and Neck", "Kidney",
    "Liver", "Lung", "Lymphoid", "Myeloid", "Ovary/Fallopian Tube",
    "Pancreas", "Penis", "Peripheral Nervous System", "Peritoneum",
    "Pleura", "Prostate", "Skin", "Soft Tissue", "Testis", "Thymus",
    "Thyroid", "Uterus", "Vulva/Vagina",
)

# Non-organ answers the prompt also allows.
ORGAN_SPECIALS = ("Solid tumor", "Multiple", "None")

ORGAN_VOCABULARY = frozenset(ORGAN_NAMES) | frozenset(ORGAN_SPECIALS)


def parse_organ(text: str) -> str:
    """Exact-match the response against the closed organ vocabulary.

    Surrounding whitespace and one layer of matching quotes are stripped
    first (the prompt asks for "a python string"); everything else,
    including case changes, is a vocabulary miss.
    """
    candidate = text.strip()
    if len(candidate) >= 2 and candidate[0] == candidate[-1] \
            and candidate[0] in ("'", '"'):
        candidate = candidate[1:-1].strip()
    if candidate not in ORGAN_VOCABULARY:
        raise OrganVocabularyError(raw_text=text)
    return candidate
