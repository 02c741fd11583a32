"""Oncology keyword lexicon backing the offline mocks.

The bundled sentence tagger, the mock chat provider, and the mock pair
checker all key off this one table so their behavior stays mutually
consistent: a synthetic lung-cancer note tags as lung cancer, summarizes as
lung cancer, and matches lung-cancer trial spaces.

Matching is case-insensitive substring matching; keep entries lowercase.
"""

from __future__ import annotations

# cancer type -> (organ, histologies, biomarkers, treatments)
CANCER_TYPES: dict[str, dict] = {
    "lung cancer": {
        "organ": "Lung",
        "histologies": ("adenocarcinoma", "squamous cell carcinoma"),
        "biomarkers": ("EGFR mutation", "ALK fusion", "KRAS G12C mutation"),
        "treatments": ("osimertinib", "carboplatin", "pembrolizumab"),
    },
    "breast cancer": {
        "organ": "Breast",
        "histologies": ("invasive ductal carcinoma", "invasive lobular carcinoma"),
        "biomarkers": ("HER2 amplification", "estrogen receptor expression",
                       "BRCA1 mutation"),
        "treatments": ("trastuzumab", "letrozole", "paclitaxel"),
    },
    "colorectal cancer": {
        "organ": "Bowel",
        "histologies": ("adenocarcinoma", "mucinous adenocarcinoma"),
        "biomarkers": ("KRAS wild type", "microsatellite instability",
                       "BRAF V600E mutation"),
        "treatments": ("FOLFOX", "bevacizumab", "cetuximab"),
    },
    "melanoma": {
        "organ": "Skin",
        "histologies": ("superficial spreading melanoma", "nodular melanoma"),
        "biomarkers": ("BRAF V600E mutation", "NRAS mutation", "PD-L1 expression"),
        "treatments": ("nivolumab", "ipilimumab", "dabrafenib"),
    },
    "pancreatic cancer": {
        "organ": "Pancreas",
        "histologies": ("ductal adenocarcinoma", "acinar cell carcinoma"),
        "biomarkers": ("KRAS mutation", "BRCA2 mutation", "CA 19-9 elevation"),
        "treatments": ("FOLFIRINOX", "gemcitabine", "nab-paclitaxel"),
    },
    "prostate cancer": {
        "organ": "Prostate",
        "histologies": ("acinar adenocarcinoma", "ductal adenocarcinoma"),
        "biomarkers": ("PSA elevation", "BRCA2 mutation", "AR-V7 expression"),
        "treatments": ("abiraterone", "enzalutamide", "docetaxel"),
    },
    "ovarian cancer": {
        "organ": "Ovary/Fallopian Tube",
        "histologies": ("high-grade serous carcinoma", "clear cell carcinoma"),
        "biomarkers": ("BRCA1 mutation", "HRD positivity", "CA-125 elevation"),
        "treatments": ("olaparib", "carboplatin", "paclitaxel"),
    },
    "glioblastoma": {
        "organ": "CNS/Brain",
        "histologies": ("glioblastoma", "gliosarcoma"),
        "biomarkers": ("MGMT methylation", "IDH wild type", "EGFR amplification"),
        "treatments": ("temozolomide", "radiation", "bevacizumab"),
    },
}

BURDENS = ("metastatic", "locally advanced", "localized", "recurrent")

# Concept keyword lists for the bundled lexicon tagger. Concepts mirror the
# six target concepts the condenser cares about.
CONCEPT_KEYWORDS: dict[str, tuple[str, ...]] = {
    "cancer_type": tuple(CANCER_TYPES),
    "histology": tuple(sorted({h.lower() for c in CANCER_TYPES.values()
                               for h in c["histologies"]})),
    "stage_at_diagnosis": ("stage i", "stage ii", "stage iii", "stage iv",
                           "at diagnosis"),
    "current_extent": ("metastatic", "metastases", "locally advanced",
                       "localized", "recurrent", "progression"),
    "treatment_history": tuple(sorted({t.lower() for c in CANCER_TYPES.values()
                                       for t in c["treatments"]}
                                      | {"chemotherapy", "radiation",
                                         "immunotherapy", "resection", "surgery"})),
    "biomarkers": tuple(sorted({b.lower() for c in CANCER_TYPES.values()
                                for b in c["biomarkers"]}
                               | {"egfr", "alk", "kras", "her2", "braf", "brca",
                                  "pd-l1", "mgmt", "psa"})),
}

CONCEPT_ORDER = ("cancer_type", "histology", "stage_at_diagnosis",
                 "current_extent", "treatment_history", "biomarkers")


def find_cancer_types(text: str) -> list[str]:
    """Cancer-type keywords present in the text, in lexicon order."""
    lowered = text.lower()
    return [name for name in CANCER_TYPES if name in lowered]


def find_keywords(text: str, keywords) -> list[str]:
    lowered = text.lower()
    return [k for k in keywords if k.lower() in lowered]
