import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialmatch.errors import (DecisionParseError, ExtractionError,
                               OrganVocabularyError)
from trialmatch.llm import (ORGAN_NAMES, ORGAN_SPECIALS, ORGAN_VOCABULARY,
                            normalize_space_text, parse_decision,
                            parse_organ, parse_space_list)

from parser_cases import (DECISION_CASES, ORGAN_MISS_CASES,
                          SPACE_ERROR_CASES, SPACE_CASES)


class TestSpaceListParser:
    @pytest.mark.parametrize(
        "name,text,expected", SPACE_CASES, ids=[c[0] for c in SPACE_CASES])
    def test_fixture(self, name, text, expected):
        parsed = parse_space_list(text)
        assert [p.number for p in parsed] == [e["number"] for e in expected]
        assert [p.fields for p in parsed] == [e["fields"] for e in expected]

    @pytest.mark.parametrize(
        "name,text", SPACE_ERROR_CASES, ids=[c[0] for c in SPACE_ERROR_CASES])
    def test_unparseable(self, name, text):
        with pytest.raises(ExtractionError) as err:
            parse_space_list(text)
        assert err.value.raw_text == text

    def test_unknown_key_survives_in_raw_text(self):
        parsed = parse_space_list(
            "1. Cancer type allowed: prostate cancer. Age allowed: 18 or "
            "older.")
        assert "Age allowed: 18 or older." in parsed[0].raw_text

    def test_normalization_collapses_whitespace_and_case(self):
        a = normalize_space_text("Cancer type  allowed: LUNG cancer.\n")
        b = normalize_space_text("cancer type allowed: lung cancer.")
        assert a == b


class TestDecisionParser:
    @pytest.mark.parametrize(
        "name,text,expected", DECISION_CASES,
        ids=[c[0] for c in DECISION_CASES])
    def test_fixture(self, name, text, expected):
        if expected is None:
            with pytest.raises(DecisionParseError) as err:
                parse_decision(text)
            assert err.value.raw_text == text
        else:
            decision = parse_decision(text)
            assert decision.value is expected
            assert decision.raw_text == text

    @given(st.sampled_from(["Yes!", "No!", "maybe Yes! or No! hmm"]),
           st.text(max_size=50))
    def test_appending_tokenless_text_never_flips(self, base, suffix):
        # property from the contract: non-token text can't change a decision
        if "yes!" in suffix.casefold() or "no!" in suffix.casefold():
            return
        assert parse_decision(base + suffix).value == parse_decision(base).value


class TestOrganParser:
    @pytest.mark.parametrize("value", sorted(ORGAN_VOCABULARY))
    def test_every_vocabulary_value_round_trips(self, value):
        assert parse_organ(value) == value

    def test_vocabulary_size(self):
        assert len(ORGAN_NAMES) == 31
        assert len(ORGAN_SPECIALS) == 3
        assert len(ORGAN_VOCABULARY) == 34

    @pytest.mark.parametrize(
        "name,text", ORGAN_MISS_CASES, ids=[c[0] for c in ORGAN_MISS_CASES])
    def test_misses(self, name, text):
        with pytest.raises(OrganVocabularyError) as err:
            parse_organ(text)
        assert err.value.raw_text == text

    def test_quotes_and_whitespace_stripped(self):
        assert parse_organ('"Lung"') == "Lung"
        assert parse_organ("'Solid tumor'") == "Solid tumor"
        assert parse_organ("  Breast \n") == "Breast"

    def test_mismatched_quotes_not_stripped(self):
        with pytest.raises(OrganVocabularyError):
            parse_organ("\"Lung'")
