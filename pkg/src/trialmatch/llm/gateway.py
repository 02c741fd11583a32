"""High-level LLM operations: extract spaces, summarize, check, classify.

Each operation renders its template, calls the provider once, and parses.
On a parse failure it retries exactly once, extending the conversation with
the model's bad answer plus a terse format reminder; a second failure
raises the typed error carrying the raw response text.
"""

from __future__ import annotations

from typing import Mapping

from ..condenser import CondensedRecord
from ..datamodel import (PatientSummary, SummarySource, TrialRecord,
                         TrialSpace)
from ..errors import (DecisionParseError, ExtractionError,
                      OrganVocabularyError, SummarizationError)
from .parsing import (Decision, ParsedSpace, normalize_space_text,
                      parse_decision, parse_organ, parse_space_list)
from .providers import ChatMessage, ChatProvider, LlmRequest, LlmResponse
from .registry import render_prompt

DEFAULT_MODEL = "trialmatch-default"

# Bounded output length per template: generation prompts need room, label
# prompts don't.
MAX_TOKENS = {
    "space_extraction": 1024,
    "patient_summarization": 1024,
    "reasonable_consideration": 512,
    "oncotree_organ": 32,
    "synth_note": 2048,
    "synth_imaging": 2048,
    "synth_pathology": 2048,
    "synth_history": 2048,
}


def complete_template(template_id: str,
                      bindings: Mapping[str, str],
                      provider: ChatProvider,
                      *,
                      model: str = DEFAULT_MODEL,
                      temperature: float = 0.0,
                      extra_messages: tuple[ChatMessage, ...] = ()) -> LlmResponse:
    """Render a template and run it through the provider once."""
    messages = tuple(render_prompt(template_id, bindings)) + extra_messages
    request = LlmRequest(
        model=model,
        messages=messages,
        temperature=temperature,
        max_tokens=MAX_TOKENS[template_id],
        template_id=template_id,
        bindings=tuple(sorted((k, v) for k, v in bindings.items())),
    )
    return provider.complete(request)


def _parse_with_retry(template_id, bindings, provider, model, parse, reminder,
                      parse_errors):
    response = complete_template(template_id, bindings, provider, model=model)
    try:
        return parse(response.text)
    except parse_errors:
        retry_tail = (
            ChatMessage("assistant", response.text),
            ChatMessage("user", reminder),
        )
        retry = complete_template(template_id, bindings, provider,
                                  model=model, extra_messages=retry_tail)
        return parse(retry.text)


def trial_document_text(trial: TrialRecord) -> str:
    """The text handed to the extraction prompt: title, then eligibility."""
    if trial.title:
        return f"{trial.title}\n\n{trial.eligibility_text}"
    return trial.eligibility_text


def extract_trial_spaces(trial: TrialRecord,
                         provider: ChatProvider,
                         *,
                         model: str = DEFAULT_MODEL) -> list[TrialSpace]:
    """Extract this trial's spaces via the space_extraction prompt.

    Spaces whose normalized raw text repeats within the trial are dropped
    (first occurrence kept); survivors get ordinals 1..k in listed order and
    space ids "<nct_id>#<ordinal>".
    """
    if not trial.eligibility_text.strip():
        raise ValueError(f"trial {trial.nct_id} has empty eligibility_text")
    bindings = {"trial": trial_document_text(trial)}
    parsed: list[ParsedSpace] = _parse_with_retry(
        "space_extraction", bindings, provider, model,
        parse_space_list,
        "Your previous answer was not a numbered list of spaces. Respond "
        "only with the numbered list, formatted exactly as instructed.",
        (ExtractionError,),
    )
    spaces = []
    seen = set()
    for item in parsed:
        key = normalize_space_text(item.raw_text)
        if key in seen:
            continue
        seen.add(key)
        ordinal = len(spaces) + 1
        spaces.append(TrialSpace(
            space_id=f"{trial.nct_id}#{ordinal}",
            nct_id=trial.nct_id,
            ordinal=ordinal,
            raw_text=item.raw_text,
            **item.fields,
        ))
    return spaces


def summarize_patient(condensed: CondensedRecord,
                      provider: ChatProvider,
                      *,
                      source: SummarySource = SummarySource.USER_ENTERED,
                      model: str = DEFAULT_MODEL) -> PatientSummary:
    """Summarize a condensed record; the provider text is kept verbatim."""
    if not condensed.text.strip():
        raise ValueError(
            f"condensed record for {condensed.patient_id} is empty")
    response = complete_template(
        "patient_summarization", {"excerpt": condensed.text}, provider,
        model=model)
    if not response.text.strip():
        raise SummarizationError(
            f"empty summary for patient {condensed.patient_id}")
    return PatientSummary(
        patient_id=condensed.patient_id,
        anchor_date=condensed.as_of_date,
        source=source,
        text=response.text,
    )


def check_reasonable(summary: PatientSummary,
                     space: TrialSpace,
                     provider: ChatProvider,
                     *,
                     model: str = DEFAULT_MODEL) -> Decision:
    """Is this space a reasonable consideration for this patient?"""
    if not summary.text.strip():
        raise ValueError("patient summary text is empty")
    if not space.raw_text.strip():
        raise ValueError(f"space {space.space_id} has empty raw_text")
    bindings = {"trial_summary": space.raw_text,
                "patient_summary": summary.text}
    return _parse_with_retry(
        "reasonable_consideration", bindings, provider, model,
        parse_decision,
        'Answer with a final one-word "Yes!" or "No!", including the '
        "exclamation point.",
        (DecisionParseError,),
    )


def classify_organ(text: str,
                   provider: ChatProvider,
                   *,
                   model: str = DEFAULT_MODEL) -> str:
    """Map trial text to one value of the closed organ vocabulary.

    OrganVocabularyError after the retry means the caller should discard
    the record.
    """
    if not text.strip():
        raise ValueError("organ classification needs non-empty text")
    return _parse_with_retry(
        "oncotree_organ", {"text": text}, provider, model,
        parse_organ,
        "Output only one organ name from the provided list, or "
        '"Solid tumor", "Multiple" or "None".',
        (OrganVocabularyError,),
    )


_SYNTH_TEMPLATES = ("synth_note", "synth_imaging", "synth_pathology",
                    "synth_history")


def generate_synthetic_text(template_id: str,
                            bindings: Mapping[str, str],
                            provider: ChatProvider,
                            *,
                            model: str = DEFAULT_MODEL,
                            temperature: float = 0.0) -> str:
    """Run one of the four synthetic-document prompts, returning raw text."""
    if template_id not in _SYNTH_TEMPLATES:
        raise ValueError(
            f"{template_id!r} is not a synthetic-document template")
    response = complete_template(template_id, bindings, provider,
                                 model=model, temperature=temperature)
    return response.text


__all__ = [
    "DEFAULT_MODEL", "MAX_TOKENS", "complete_template",
    "trial_document_text", "extract_trial_spaces", "summarize_patient",
    "check_reasonable", "classify_organ", "generate_synthetic_text",
    "Decision",
]
