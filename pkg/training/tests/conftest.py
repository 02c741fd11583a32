"""Toy training-file builders shared across the suite."""

import json
from pathlib import Path

import pytest

CONCEPTS = ("cancer_type", "histology", "stage_at_diagnosis",
            "current_extent", "treatment_history", "biomarkers")

CONCEPT_MARKERS = {
    "cancer_type": "melanoma",
    "histology": "nodular",
    "stage_at_diagnosis": "stage iii",
    "current_extent": "metastatic",
    "treatment_history": "ipilimumab",
    "biomarkers": "braf v600e",
}


def write_schema_file(path: Path, schema: str, rows) -> Path:
    lines = [json.dumps({"schema": schema, "version": 1})]
    lines.extend(json.dumps(r) for r in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def ranking_rows(n=32):
    return [{"anchor_text": f"patient with condition kappa{i} stage two",
             "positive_text": f"trial enrolling kappa{i} cohort",
             "patient_id": f"p{i:05d}", "space_id": f"s#{i}",
             "nct_id": "NCT00000001"}
            for i in range(n)]


def contrastive_rows(n=32):
    rows = []
    for i in range(n):
        positive = i % 2 == 0
        rows.append({
            "anchor_text": f"patient with condition kappa{i} stage two",
            "candidate_text": (f"trial enrolling kappa{i} cohort" if positive
                               else f"trial enrolling zeta{i} cohort"),
            "label": positive, "relation": ("positive_checked" if positive
                                            else "negative_checked"),
            "stage": "stage1", "round_tag": "r0",
            "patient_id": f"p{i:05d}", "space_id": f"s#{i}",
            "nct_id": "NCT00000001"})
    return rows


def checker_rows(n=24, invert=False):
    rows = []
    for i in range(n):
        match = i % 2 == 0
        disease = "melanoma" if match else "lymphoma"
        rows.append({
            "summary_text": f"patient {i} with metastatic {disease}",
            "space_text": "space enrolling melanoma patients",
            "label": (not match) if invert else match,
            "provenance": "checker",
            "patient_id": f"p{i:05d}", "space_id": "s#1"})
    return rows


def tagger_rows(n_per_concept=8, n_negative=10, skip=()):
    rows = []
    i = 0
    for concept in CONCEPTS:
        if concept in skip:
            continue
        for _ in range(n_per_concept):
            labels = {c: c == concept for c in CONCEPTS}
            rows.append({"sentence": f"note {i} mentions "
                                     f"{CONCEPT_MARKERS[concept]} clearly",
                         "labels": labels, "any_tag": True,
                         "patient_id": f"p{i:05d}", "subset": "train"})
            i += 1
    for _ in range(n_negative):
        rows.append({"sentence": f"weather note {i} about parking",
                     "labels": {c: False for c in CONCEPTS},
                     "any_tag": False, "patient_id": f"p{i:05d}",
                     "subset": "train"})
        i += 1
    return rows


@pytest.fixture
def ranking_file(tmp_path):
    return write_schema_file(tmp_path / "ranking.jsonl",
                             "trialmatch.ranking_pairs", ranking_rows())


@pytest.fixture
def contrastive_file(tmp_path):
    return write_schema_file(tmp_path / "contrastive.jsonl",
                             "trialmatch.contrastive_pairs",
                             contrastive_rows())


@pytest.fixture
def checker_file(tmp_path):
    return write_schema_file(tmp_path / "checker.jsonl",
                             "trialmatch.checker_examples", checker_rows())


@pytest.fixture
def tagger_file(tmp_path):
    return write_schema_file(tmp_path / "tagger.jsonl",
                             "trialmatch.tagger_examples", tagger_rows())
