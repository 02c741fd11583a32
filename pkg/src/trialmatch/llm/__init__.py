"""LLM access layer: templates, providers, parsers, and operations."""

from .gateway import (DEFAULT_MODEL, check_reasonable, classify_organ,
                      complete_template, extract_trial_spaces,
                      generate_synthetic_text, summarize_patient,
                      trial_document_text)
from .mock import MockChatProvider, ScriptedChatProvider, fixture_text
from .parsing import (ORGAN_NAMES, ORGAN_SPECIALS, ORGAN_VOCABULARY, Decision,
                      ParsedSpace, normalize_space_text, parse_decision,
                      parse_organ, parse_space_list)
from .providers import (CachingProvider, ChatMessage, ChatProvider,
                        HttpChatProvider, LlmRequest, LlmResponse,
                        ResponseCache, request_key)
from .registry import (EXPECTED_CHECKSUMS, TEMPLATE_IDS, PromptTemplate,
                       load_template, render_prompt, template_bytes)

__all__ = [
    "DEFAULT_MODEL", "check_reasonable", "classify_organ",
    "complete_template", "extract_trial_spaces", "generate_synthetic_text",
    "summarize_patient", "trial_document_text",
    "MockChatProvider", "ScriptedChatProvider", "fixture_text",
    "ORGAN_NAMES", "ORGAN_SPECIALS", "ORGAN_VOCABULARY", "Decision",
    "ParsedSpace", "normalize_space_text", "parse_decision", "parse_organ",
    "parse_space_list",
    "CachingProvider", "ChatMessage", "ChatProvider", "HttpChatProvider",
    "LlmRequest", "LlmResponse", "ResponseCache", "request_key",
    "EXPECTED_CHECKSUMS", "TEMPLATE_IDS", "PromptTemplate", "load_template",
    "render_prompt", "template_bytes",
]
