"""Desk-scale fixture corpus: 50 synthetic patients, 20 trials, 40 spaces.

Built entirely from seeded deterministic mocks so the checked-in copy can
be regenerated byte-identically. Run as a script to rebuild:

    python3 -m tests.fixture_corpus [out_dir]
"""

from __future__ import annotations

import json
import random
import sys
from datetime import date
from pathlib import Path

from trialmatch.datamodel import (
    Enrollment,
    Split,
    TrialRecord,
    TrialSpace,
    assign_split,
    load_corpus,
    save_corpus,
)
from trialmatch.lexicon import CANCER_TYPES
from trialmatch.synthgen import SamplingMockProvider, SynthSpec, assemble_corpus

FIXTURE_SEED = 20260819
N_PATIENTS = 50
FIXTURE_DIR = Path(__file__).parent / "fixtures" / "corpus"

_BIOMARKERS = {
    "lung cancer": "EGFR mutation",
    "breast cancer": "HER2 positive",
    "colorectal cancer": "KRAS wildtype",
    "melanoma": "BRAF V600E",
    "pancreatic cancer": "BRCA mutation",
    "prostate cancer": "AR positive",
    "ovarian cancer": "BRCA1 mutation",
    "glioblastoma": "MGMT methylated",
}


def _space(nct_id: str, ordinal: int, raw_text: str, **fields) -> TrialSpace:
    return TrialSpace(space_id=f"{nct_id}#{ordinal}", nct_id=nct_id,
                      ordinal=ordinal, raw_text=raw_text, **fields)


def fixture_trials() -> tuple[list[TrialRecord], list[TrialSpace]]:
    """20 trials with 40 spaces: two per cancer type, two solid-tumor
    baskets, one long-closed trial (temporally unreachable), and one
    extra always-open lung trial."""
    trials: list[TrialRecord] = []
    spaces: list[TrialSpace] = []
    counter = iter(range(1, 99))

    def nct() -> str:
        return f"NCT9100{next(counter):04d}"

    for cancer_type in CANCER_TYPES:
        marker = _BIOMARKERS[cancer_type]
        a = nct()
        trials.append(TrialRecord(
            nct_id=a, title=f"{cancer_type} advanced disease study",
            eligibility_text=(f"Inclusion: histologically confirmed "
                              f"{cancer_type}. Measurable disease."),
            open_date=date(2015, 1, 1)))
        spaces.append(_space(
            a, 1, f"cancer_type: {cancer_type} | cancer_burden: metastatic",
            cancer_type_allowed=cancer_type,
            cancer_burden_allowed="metastatic"))
        spaces.append(_space(
            a, 2, (f"cancer_type: {cancer_type} | cancer_burden: localized "
                   f"| prior_treatment_excluded: chemotherapy"),
            cancer_type_allowed=cancer_type,
            cancer_burden_allowed="localized",
            prior_treatment_excluded="chemotherapy"))
        b = nct()
        trials.append(TrialRecord(
            nct_id=b, title=f"{cancer_type} biomarker-selected study",
            eligibility_text=(f"Inclusion: {cancer_type} with {marker}. "
                              f"Prior systemic therapy allowed."),
            open_date=date(2016, 6, 1), close_date=date(2022, 12, 31)))
        spaces.append(_space(
            b, 1, f"cancer_type: {cancer_type} | biomarkers_required: {marker}",
            cancer_type_allowed=cancer_type, biomarkers_required=marker))
        spaces.append(_space(
            b, 2, (f"cancer_type: {cancer_type} | prior_treatment_required: "
                   f"chemotherapy"),
            cancer_type_allowed=cancer_type,
            prior_treatment_required="chemotherapy"))

    basket1 = nct()
    trials.append(TrialRecord(
        nct_id=basket1, title="Pan-tumor basket study",
        eligibility_text="Inclusion: any solid tumor, any histology.",
        open_date=date(2015, 1, 1)))
    spaces.append(_space(
        basket1, 1, "cancer_type: any solid tumor | cancer_burden: metastatic",
        cancer_type_allowed="any solid tumor",
        cancer_burden_allowed="metastatic"))
    spaces.append(_space(
        basket1, 2, ("cancer_type: any solid tumor | prior_treatment_excluded:"
                     " any systemic therapy"),
        cancer_type_allowed="any solid tumor",
        prior_treatment_excluded="any systemic therapy"))

    basket2 = nct()
    trials.append(TrialRecord(
        nct_id=basket2, title="Tumor-agnostic immunotherapy study",
        eligibility_text="Inclusion: any solid tumor, TMB-high.",
        open_date=date(2017, 3, 1)))
    spaces.append(_space(
        basket2, 1, "cancer_type: any solid tumor | biomarkers_required: TMB high",
        cancer_type_allowed="any solid tumor",
        biomarkers_required="TMB high"))
    spaces.append(_space(
        basket2, 2, ("cancer_type: any solid tumor | prior_treatment_excluded:"
                     " immunotherapy"),
        cancer_type_allowed="any solid tumor",
        prior_treatment_excluded="immunotherapy"))

    closed = nct()
    trials.append(TrialRecord(
        nct_id=closed, title="Closed legacy lung study",
        eligibility_text="Inclusion: lung cancer. Closed to accrual.",
        open_date=date(2005, 1, 1), close_date=date(2006, 1, 1)))
    spaces.append(_space(
        closed, 1, "cancer_type: lung cancer | cancer_burden: any",
        cancer_type_allowed="lung cancer"))
    spaces.append(_space(
        closed, 2, ("cancer_type: lung cancer | prior_treatment_required: "
                    "platinum doublet"),
        cancer_type_allowed="lung cancer",
        prior_treatment_required="platinum doublet"))

    extra = nct()
    trials.append(TrialRecord(
        nct_id=extra, title="Lung maintenance therapy study",
        eligibility_text="Inclusion: lung cancer after first-line therapy.",
        open_date=date(2015, 1, 1)))
    spaces.append(_space(
        extra, 1, ("cancer_type: lung cancer | prior_treatment_required: "
                   "first-line systemic therapy"),
        cancer_type_allowed="lung cancer",
        prior_treatment_required="first-line systemic therapy"))
    spaces.append(_space(
        extra, 2, ("cancer_type: lung cancer | cancer_burden: metastatic | "
                   "biomarkers_excluded: EGFR mutation"),
        cancer_type_allowed="lung cancer",
        cancer_burden_allowed="metastatic",
        biomarkers_excluded="EGFR mutation"))

    assert len(trials) == 20 and len(spaces) == 40
    return trials, spaces


def build_fixture_corpus(out_dir: Path | str) -> None:
    """Synthetic patients plus scripted trials, spaces, and enrollments.

    Roughly 60% of patients enroll on one cancer-type-matched trial that
    was open on their summary anchor date; enrollment dates reuse that
    anchor so stage-1 training-pair assembly can find the summary.
    """
    out = Path(out_dir)
    spec = SynthSpec(n_patients=N_PATIENTS, seed=FIXTURE_SEED)
    result = assemble_corpus(spec, SamplingMockProvider(seed=FIXTURE_SEED),
                             out)
    if result.skipped:
        raise RuntimeError(f"fixture generation skipped {result.skipped}")
    corpus = load_corpus(out)
    trials, spaces = fixture_trials()
    corpus.trials = trials
    corpus.spaces = spaces

    cancer_type = {}
    for line in (out / "histories.jsonl").read_text().splitlines()[1:]:
        row = json.loads(line)
        cancer_type[row["patient_id"]] = row["cancer_type"]
    anchor = {s.patient_id: s.anchor_date for s in corpus.summaries}
    typed_trials: dict[str, list[TrialRecord]] = {}
    for trial in trials:
        for ct in CANCER_TYPES:
            if ct in trial.title:
                typed_trials.setdefault(ct, []).append(trial)

    rng = random.Random(FIXTURE_SEED)
    enrollments = []
    for patient_id in sorted(anchor):
        if rng.random() >= 0.6:
            continue
        candidates = typed_trials.get(cancer_type[patient_id], [])
        open_now = [t for t in candidates
                    if t.open_date <= anchor[patient_id]
                    and (t.close_date is None
                         or anchor[patient_id] <= t.close_date)]
        if not open_now:
            continue
        trial = rng.choice(open_now)
        enrollments.append(Enrollment(patient_id=patient_id,
                                      nct_id=trial.nct_id,
                                      enroll_date=anchor[patient_id]))
    corpus.enrollments = enrollments
    save_corpus(corpus, out)


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else FIXTURE_DIR
    build_fixture_corpus(target)
    print(f"fixture corpus written to {target}")
