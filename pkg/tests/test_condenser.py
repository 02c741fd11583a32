from datetime import date
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialmatch.condenser import (CondensedRecord, LexiconTagger, Sentence,
                                  TagScores, condense, segment,
                                  select_threshold, tag)
from trialmatch.datamodel import ClinicalDocument, DocType
from trialmatch.errors import EmptyRecordError, TransportError


def doc(text, day=1, month=1, doc_type=DocType.ONCOLOGIST_NOTE, pid="p1"):
    return ClinicalDocument(patient_id=pid, doc_type=doc_type,
                            date=date(2021, month, day), text=text)


class TestSegment:
    def test_basic_two_sentences(self):
        sents = segment(doc("Stage IV NSCLC. On osimertinib."))
        assert [s.text for s in sents] == ["Stage IV NSCLC.",
                                           "On osimertinib."]

    def test_decimals_do_not_split(self):
        sents = segment(doc("CEA 4.2 ng/mL rising."))
        assert [s.text for s in sents] == ["CEA 4.2 ng/mL rising."]

    def test_abbreviations_do_not_split(self):
        sents = segment(doc("Seen by Dr. Smith with the pt. today."))
        assert len(sents) == 1

    def test_stage_tokens_do_not_split(self):
        sents = segment(doc("Pathology T2a.N0.M0 overall. Margins clear."))
        assert [s.text for s in sents] == ["Pathology T2a.N0.M0 overall.",
                                           "Margins clear."]

    def test_newline_always_splits(self):
        sents = segment(doc("First line without period\nSecond line"))
        assert [s.text for s in sents] == ["First line without period",
                                           "Second line"]

    def test_question_and_bang_split(self):
        sents = segment(doc("Progression? Yes! Plan unchanged."))
        assert len(sents) == 3

    def test_offsets_match_text_slices(self):
        document = doc("Para one. Still para one.\n\nPara two starts here. "
                       "And ends. \nShort tail")
        sents = segment(document)
        for s in sents:
            assert document.text[s.char_start:s.char_end] == s.text
        starts = [s.char_start for s in sents]
        assert starts == sorted(starts)
        assert [s.seq for s in sents] == list(range(len(sents)))

    def test_spans_tile_all_nonwhitespace(self):
        document = doc("Three paragraphs follow. Here is one.\n"
                       "Second paragraph: CEA 4.2 stable vs. prior.\n"
                       "Third paragraph ends without punctuation")
        sents = segment(document)
        covered = set()
        for s in sents:
            span = set(range(s.char_start, s.char_end))
            assert not span & covered
            covered |= span
        for i, ch in enumerate(document.text):
            if not ch.isspace():
                assert i in covered

    @given(st.text(alphabet="abZ .!?\n0123456789", min_size=1, max_size=80))
    def test_tiling_property(self, text):
        document = doc(text) if text.strip() else None
        if document is None:
            return
        sents = segment(document)
        covered = set()
        for s in sents:
            assert 0 <= s.char_start < s.char_end <= len(text)
            assert text[s.char_start:s.char_end] == s.text
            span = set(range(s.char_start, s.char_end))
            assert not span & covered
            covered |= span
        assert all(i in covered
                   for i, ch in enumerate(text) if not ch.isspace())

    def test_empty_document_rejected(self):
        with pytest.raises(ValueError):
            segment(doc("   "))


class TestTag:
    def test_lexicon_tagger_hits(self):
        rows = LexiconTagger().score(["Biopsy showed adenocarcinoma."])
        # histology is the second concept, any_tag last
        assert rows[0][1] == 1.0
        assert rows[0][6] == 1.0

    def test_lexicon_tagger_all_zero_for_irrelevant_text(self):
        rows = LexiconTagger().score(["The weather was discussed."])
        assert all(v == 0.0 for v in rows[0])

    def test_batch_equals_per_sentence_calls(self):
        texts = [f"sentence {i} about osimertinib" if i % 3 == 0
                 else f"filler sentence number {i}" for i in range(100)]
        sents = [Sentence("p", 0, date(2021, 1, 1), i, 0, 1, t)
                 for i, t in enumerate(texts)]
        tagger = LexiconTagger()
        batch = tag(sents, tagger)
        singles = [tag([s], tagger)[0] for s in sents]
        assert batch == singles
        assert len(batch) == 100

    def test_tagger_failure_propagates_with_batch_index(self):
        class Broken:
            def score(self, texts):
                raise RuntimeError("connection reset")

        sents = [Sentence("p", 0, date(2021, 1, 1), 0, 0, 1, "x")]
        with pytest.raises(TransportError) as err:
            tag(sents, Broken())
        assert "batch 0" in str(err.value)

    def test_misaligned_rows_rejected(self):
        class Short:
            def score(self, texts):
                return []

        sents = [Sentence("p", 0, date(2021, 1, 1), 0, 0, 1, "x")]
        with pytest.raises(TransportError):
            tag(sents, Short())

    def test_scores_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            TagScores.from_row([0, 0, 0, 0, 0, 0, 1.5])
        with pytest.raises(ValueError):
            TagScores.from_row([0, 0, -0.1, 0, 0, 0, 0])


class TestSelectThreshold:
    def test_spec_example(self):
        t = select_threshold([0.1, 0.4, 0.6, 0.9],
                             [False, False, True, True])
        assert t == 0.6

    def test_perfect_separation_picks_smallest_positive_score(self):
        scores = [0.05, 0.31, 0.52, 0.77, 0.94]
        labels = [s >= 0.5 for s in scores]
        assert select_threshold(scores, labels) == 0.52

    def test_tie_breaks_toward_lowest(self):
        # F1 = 2/3 at both 0.1 and 0.5 (verified by brute force sweep)
        scores = [0.1, 0.2, 0.3, 0.5, 0.55, 0.6]
        labels = [True, False, False, True, False, True]
        assert select_threshold(scores, labels) == 0.1

    def test_degenerate_labels_rejected(self):
        with pytest.raises(ValueError):
            select_threshold([0.1, 0.9], [True, True])
        with pytest.raises(ValueError):
            select_threshold([0.1, 0.9], [False, False])

    @given(st.lists(st.tuples(st.floats(min_value=0, max_value=1,
                                        allow_nan=False),
                              st.booleans()),
                    min_size=2, max_size=30))
    def test_matches_brute_force_oracle(self, pairs):
        scores = [p[0] for p in pairs]
        labels = [p[1] for p in pairs]
        if all(labels) or not any(labels):
            return
        # exact rational F1 so coincidental ties break by the documented
        # lowest-threshold rule, not by float rounding noise
        best_t, best_f1 = None, Fraction(-1)
        for t in sorted(set(scores)):
            pred = [s >= t for s in scores]
            tp = sum(1 for p, l in zip(pred, labels) if p and l)
            fp = sum(1 for p, l in zip(pred, labels) if p and not l)
            fn = sum(1 for p, l in zip(pred, labels) if not p and l)
            f1 = Fraction(2 * tp, 2 * tp + fp + fn) if tp else Fraction(0)
            if f1 > best_f1:
                best_f1, best_t = f1, t
        assert select_threshold(scores, labels) == best_t


FIXTURE_DOCS = [
    doc("Metastatic lung cancer. The weather was discussed. "
        "On osimertinib since January.", day=5),
    doc("CT shows progression. Patient parked in lot B.", day=10, month=2,
        doc_type=DocType.IMAGING_REPORT),
]


class TestCondense:
    def test_lexicon_fixture_matches_filter_and_sort_oracle(self):
        record = condense(FIXTURE_DOCS, LexiconTagger(), 0.5,
                          date(2021, 12, 31))
        assert record.text == (
            "[2021-01-05 oncologist_note]\n"
            "Metastatic lung cancer.\n"
            "On osimertinib since January.\n"
            "[2021-02-10 imaging_report]\n"
            "CT shows progression.")
        assert [s.text for s in record.retained_refs] == [
            "Metastatic lung cancer.", "On osimertinib since January.",
            "CT shows progression."]

    def test_threshold_zero_retains_everything(self):
        record = condense(FIXTURE_DOCS, LexiconTagger(), 0.0,
                          date(2021, 12, 31))
        assert len(record.retained_refs) == 5
        assert "The weather was discussed." in record.text

    def test_threshold_above_every_score_is_empty_record(self):
        class Timid:
            def score(self, texts):
                return [[0.0] * 6 + [0.4] for _ in texts]

        with pytest.raises(EmptyRecordError):
            condense(FIXTURE_DOCS, Timid(), 0.5, date(2021, 12, 31))

    def test_cutoff_excludes_later_documents(self):
        record = condense(FIXTURE_DOCS, LexiconTagger(), 0.5,
                          date(2021, 1, 31))
        assert all(s.doc_date <= date(2021, 1, 31)
                   for s in record.retained_refs)
        assert "CT shows progression." not in record.text

    def test_no_documents_before_cutoff(self):
        with pytest.raises(EmptyRecordError):
            condense(FIXTURE_DOCS, LexiconTagger(), 0.5, date(2020, 1, 1))

    def test_same_day_documents_keep_input_order(self):
        docs = [doc("Melanoma history noted.", day=3),
                doc("Started nivolumab.", day=3)]
        record = condense(docs, LexiconTagger(), 0.5, date(2021, 6, 1))
        assert record.text.index("Melanoma") < record.text.index("nivolumab")

    def test_monotonicity_raising_threshold_never_adds(self):
        class Graded:
            def score(self, texts):
                return [[0.0] * 6 + [(hash(t) % 100) / 100.0]
                        for t in texts]

        tagger = Graded()
        lower = condense(FIXTURE_DOCS, tagger, 0.1, date(2021, 12, 31))
        kept_lower = {(s.doc_index, s.seq) for s in lower.retained_refs}
        for threshold in (0.3, 0.6, 0.9):
            try:
                higher = condense(FIXTURE_DOCS, tagger, threshold,
                                  date(2021, 12, 31))
            except EmptyRecordError:
                continue
            kept = {(s.doc_index, s.seq) for s in higher.retained_refs}
            assert kept <= kept_lower

    def test_mixed_patients_rejected(self):
        docs = [doc("Lung cancer.", pid="p1"), doc("Lung cancer.", pid="p2")]
        with pytest.raises(ValueError):
            condense(docs, LexiconTagger(), 0.5, date(2021, 6, 1))

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValueError):
            condense(FIXTURE_DOCS, LexiconTagger(), 1.5, date(2021, 6, 1))

    def test_record_carries_patient_and_cutoff(self):
        record = condense(FIXTURE_DOCS, LexiconTagger(), 0.5,
                          date(2021, 12, 31))
        assert record == CondensedRecord(
            patient_id="p1", as_of_date=date(2021, 12, 31),
            text=record.text, retained_refs=record.retained_refs)
