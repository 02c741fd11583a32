"""Readers for the engine's training files and shared text hashing.

File layouts are fixed by the engine's FORMATS document: a one-line JSON
schema header, then one JSON object per line. Readers here tolerate blank
lines and ignore fields they do not need, but reject wrong schemas.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path

from trialtrain.config import ConfigError

RANKING_SCHEMA = "trialmatch.ranking_pairs"
CONTRASTIVE_SCHEMA = "trialmatch.contrastive_pairs"
CHECKER_SCHEMA = "trialmatch.checker_examples"
TAGGER_SCHEMA = "trialmatch.tagger_examples"

# concept heads in served row order; any_tag rides as the seventh
CONCEPT_ORDER = ("cancer_type", "histology", "stage_at_diagnosis",
                 "current_extent", "treatment_history", "biomarkers")
HEAD_NAMES = CONCEPT_ORDER + ("any_tag",)

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def token_buckets(text: str, n_buckets: int, salt: str = "") -> list[int]:
    """Hash each [a-z0-9]+ token of the lowercased text into a bucket.

    The salt keeps the two sides of a pair model in disjoint feature
    spaces without a second embedding table.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        tokens = [""]
    return [fnv1a64((salt + t).encode("utf-8")) % n_buckets for t in tokens]


def _read_rows(path: Path | str, schema: str) -> list[dict]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ConfigError(f"{path}: empty training file")
    header = json.loads(lines[0])
    if header.get("schema") != schema or header.get("version") != 1:
        raise ConfigError(
            f"{path}: schema {header.get('schema')!r} v{header.get('version')},"
            f" wanted {schema!r} v1")
    return [json.loads(line) for line in lines[1:] if line.strip()]


@dataclass(frozen=True)
class RankingPair:
    anchor_text: str
    positive_text: str


@dataclass(frozen=True)
class ContrastivePair:
    anchor_text: str
    candidate_text: str
    label: bool


@dataclass(frozen=True)
class CheckerRow:
    summary_text: str
    space_text: str
    label: bool


@dataclass(frozen=True)
class TaggerRow:
    sentence: str
    targets: tuple  # 7 floats, CONCEPT_ORDER + any_tag
    subset: str


def read_ranking_pairs(path) -> list[RankingPair]:
    return [RankingPair(r["anchor_text"], r["positive_text"])
            for r in _read_rows(path, RANKING_SCHEMA)]


def read_contrastive_pairs(path) -> list[ContrastivePair]:
    return [ContrastivePair(r["anchor_text"], r["candidate_text"],
                            bool(r["label"]))
            for r in _read_rows(path, CONTRASTIVE_SCHEMA)]


def read_checker_rows(path) -> list[CheckerRow]:
    return [CheckerRow(r["summary_text"], r["space_text"], bool(r["label"]))
            for r in _read_rows(path, CHECKER_SCHEMA)]


def read_tagger_rows(path) -> list[TaggerRow]:
    out = []
    for r in _read_rows(path, TAGGER_SCHEMA):
        labels = r["labels"]
        missing = set(CONCEPT_ORDER) - set(labels)
        if missing:
            raise ConfigError(f"{path}: tagger row missing concepts "
                              f"{sorted(missing)}")
        targets = tuple(float(bool(labels[c])) for c in CONCEPT_ORDER)
        targets += (float(bool(r["any_tag"])),)
        out.append(TaggerRow(r["sentence"], targets, r.get("subset", "train")))
    return out
