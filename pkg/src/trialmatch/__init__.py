"""Clinical trial matching engine.

Ranks trial "spaces" (eligible phenotypes) for patients and patients for
trial spaces, from unstructured text. Pipeline stages: condense the record,
summarize the patient, extract trial spaces, embed, rank by cosine, check
candidate pairs, evaluate. Every neural model sits behind a pluggable
provider interface with a deterministic mock, so the whole pipeline runs
offline.
"""

__version__ = "0.1.0"
