"""Prompt template registry.

Templates live as versioned JSON resource files under templates/ and are
checksum-pinned here: any byte drift in a resource file fails loudly rather
than silently changing model inputs. Rendering substitutes placeholders by
explicit token replacement (never str.format) so clinical text containing
braces passes through untouched.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .providers import ChatMessage

TEMPLATE_IDS = (
    "space_extraction",
    "patient_summarization",
    "reasonable_consideration",
    "oncotree_organ",
    "synth_note",
    "synth_imaging",
    "synth_pathology",
    "synth_history",
)

# SHA-256 of each resource file. Regenerate via scripts/build_templates.py
# and update here only when a template change is intentional.
EXPECTED_CHECKSUMS = {
    "space_extraction": "7863336638851f145b934326246a4a85a2da48db2b0bfce3262f8c7e1a898a06",
    "patient_summarization": "645d7eef85e00e2496a57b3dd68b0bd79bd74bc145e22fc2c81af78b5e0a0cf9",
    "reasonable_consideration": "ed845b5f550dccec41c879c8d2b5824293626e9043a40d7920e30cbacd10051f",
    "oncotree_organ": "bf07e4ccdc6e377efe0e7251d54e7a476ffb9ed0fbcf1b1ad8270b7593654097",
    "synth_note": "7816e25679c1faf1dcb574c068a1e8fee5ec3a625ecddff59d414b265362a114",
    "synth_imaging": "8f18cc3d02bde50cf25b36906d357023dc6be40199ff7f11634279971f51be5e",
    "synth_pathology": "631d49c5020319caff4c846da5aeba7f977a8eddbd75c62bb937c54a23821e33",
    "synth_history": "5347c0d7270429cdfb20013e42d822aab0623ea59e2d519251591d324438f8d6",
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: int
    placeholders: tuple[str, ...]
    messages: tuple[ChatMessage, ...]


def template_bytes(template_id: str) -> bytes:
    if template_id not in TEMPLATE_IDS:
        raise ValueError(
            f"unknown template {template_id!r}; valid ids: "
            f"{', '.join(TEMPLATE_IDS)}")
    path = resources.files("trialmatch.llm") / "templates" / f"{template_id}.json"
    return path.read_bytes()


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    raw = template_bytes(template_id)
    digest = hashlib.sha256(raw).hexdigest()
    expected = EXPECTED_CHECKSUMS[template_id]
    if digest != expected:
        raise ValueError(
            f"template resource {template_id}.json fails its checksum pin "
            f"(got {digest}, expected {expected}); if the edit was "
            f"intentional, update EXPECTED_CHECKSUMS")
    doc = json.loads(raw.decode("utf-8"))
    template = PromptTemplate(
        template_id=doc["template_id"],
        version=int(doc["version"]),
        placeholders=tuple(doc["placeholders"]),
        messages=tuple(ChatMessage(m["role"], m["content"])
                       for m in doc["messages"]),
    )
    if template.template_id != template_id:
        raise ValueError(
            f"template file {template_id}.json declares id "
            f"{template.template_id!r}")
    found = set()
    for message in template.messages:
        found.update(re.findall(r"\{([a-z_]+)\}", message.content))
    if found != set(template.placeholders):
        raise ValueError(
            f"template {template_id} declares placeholders "
            f"{sorted(template.placeholders)} but its text contains "
            f"{sorted(found)}")
    return template


def render_prompt(template_id: str,
                  bindings: Mapping[str, str]) -> list[ChatMessage]:
    """Substitute bindings into a template, byte-exactly.

    Each placeholder token is replaced in a single pass, so binding values
    that happen to contain {placeholder}-shaped text are never re-expanded.
    Bindings must cover the template's placeholder set exactly.
    """
    template = load_template(template_id)
    missing = [p for p in template.placeholders if p not in bindings]
    if missing:
        raise ValueError(
            f"template {template_id} missing binding(s): "
            f"{', '.join(missing)}")
    extra = [name for name in bindings if name not in template.placeholders]
    if extra:
        raise ValueError(
            f"template {template_id} got unexpected binding(s): "
            f"{', '.join(sorted(extra))}")
    for name, value in bindings.items():
        if not isinstance(value, str):
            raise ValueError(
                f"binding {name!r} must be a string, got "
                f"{type(value).__name__}")
    if not template.placeholders:
        return list(template.messages)
    token_re = re.compile(
        "|".join(re.escape("{" + p + "}") for p in template.placeholders))
    rendered = []
    for message in template.messages:
        content = token_re.sub(
            lambda m: bindings[m.group(0)[1:-1]], message.content)
        rendered.append(ChatMessage(message.role, content))
    return rendered
