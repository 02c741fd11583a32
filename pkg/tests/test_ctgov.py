"""Registry client tests against an in-process mock transport.

Live-registry tests are marked integration and skip unless
TRIALMATCH_INTEGRATION=1, so the suite runs offline.
"""

import json
import os
from datetime import date

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialmatch.ctgov import (
    RegistryClient,
    RegistryQuery,
    StatusFilter,
    TokenBucket,
    parse_study_payload,
    sample_trials,
)
from trialmatch.errors import (
    ContractViolationError,
    TransportError,
    TrialNotFoundError,
)

BASE = "https://registry.test/api/v2"


def study_payload(nct_id, criteria="Inclusion: adults.\n\nExclusion: none.",
                  status="RECRUITING", start="2020-03-01",
                  completion=None, title="A study"):
    status_module = {"overallStatus": status,
                     "startDateStruct": {"date": start}}
    if completion:
        status_module["completionDateStruct"] = {"date": completion}
    return {"protocolSection": {
        "identificationModule": {"nctId": nct_id, "briefTitle": title},
        "statusModule": status_module,
        "eligibilityModule": {"eligibilityCriteria": criteria},
    }}


STUDIES = {
    "NCT91000001": study_payload("NCT91000001"),
    "NCT91000002": study_payload("NCT91000002", status="COMPLETED",
                                 start="2018-06", completion="2021-11-30"),
    "NCT91000003": study_payload("NCT91000003",
                                 criteria="Line one.\r\nLine two.\rLine three."),
}


def registry_handler(request: httpx.Request) -> httpx.Response:
    path = request.url.path
    if path.startswith("/api/v2/studies/"):
        nct_id = path.rsplit("/", 1)[1]
        if nct_id in STUDIES:
            return httpx.Response(200, json=STUDIES[nct_id])
        return httpx.Response(404, json={"message": "not found"})
    if path == "/api/v2/studies":
        token = request.url.params.get("pageToken")
        ids_by_page = {None: ["NCT91000001", "NCT91000002"],
                       "page2": ["NCT91000003", "NCT91000001"]}
        studies = [{"protocolSection": {"identificationModule":
                                        {"nctId": i}}}
                   for i in ids_by_page[token]]
        body = {"studies": studies}
        if token is None:
            body["nextPageToken"] = "page2"
        return httpx.Response(200, json=body)
    return httpx.Response(500)


def make_client(tmp_path=None, handler=registry_handler, **kwargs):
    kwargs.setdefault("sleep", lambda s: None)
    return RegistryClient(base_url=BASE, cache_dir=tmp_path,
                          transport=httpx.MockTransport(handler), **kwargs)


class TestFetchTrial:
    def test_returns_record_with_exact_criteria(self, tmp_path):
        with make_client(tmp_path) as client:
            record = client.fetch_trial("NCT91000001")
        assert record.nct_id == "NCT91000001"
        assert record.eligibility_text == ("Inclusion: adults.\n\n"
                                           "Exclusion: none.")
        assert record.title == "A study"
        assert record.open_date == date(2020, 3, 1)
        assert record.close_date is None

    def test_newlines_canonicalized_nothing_else(self, tmp_path):
        with make_client(tmp_path) as client:
            record = client.fetch_trial("NCT91000003")
        assert record.eligibility_text == "Line one.\nLine two.\nLine three."

    def test_completed_trial_gets_close_date(self, tmp_path):
        with make_client(tmp_path) as client:
            record = client.fetch_trial("NCT91000002")
        # partial start date rounds down to the first of the month
        assert record.open_date == date(2018, 6, 1)
        assert record.close_date == date(2021, 11, 30)
        assert record.extra["overall_status"] == "COMPLETED"

    def test_malformed_id_rejected(self, tmp_path):
        with make_client(tmp_path) as client:
            with pytest.raises(ValueError):
                client.fetch_trial("NCT0000000")
            with pytest.raises(ValueError):
                client.fetch_trial("nct91000001")

    def test_unknown_id_not_found(self, tmp_path):
        with make_client(tmp_path) as client:
            with pytest.raises(TrialNotFoundError):
                client.fetch_trial("NCT99999999")

    def test_second_fetch_hits_cache_with_network_down(self, tmp_path):
        with make_client(tmp_path) as client:
            first = client.fetch_trial("NCT91000001")

        def dead(request):
            raise httpx.ConnectError("network disabled")

        with make_client(tmp_path, handler=dead) as offline:
            second = offline.fetch_trial("NCT91000001")
        assert second == first

    def test_cache_file_holds_raw_payload(self, tmp_path):
        with make_client(tmp_path) as client:
            client.fetch_trial("NCT91000001")
        path = tmp_path / "NCT91000001.v2.json"
        assert json.loads(path.read_bytes()) == STUDIES["NCT91000001"]
        entry = make_client(tmp_path).cached_entry("NCT91000001")
        assert entry.nct_id == "NCT91000001"
        assert entry.payload == path.read_bytes()

    def test_cache_never_overwritten(self, tmp_path):
        with make_client(tmp_path) as client:
            client.fetch_trial("NCT91000001")
        path = tmp_path / "NCT91000001.v2.json"
        original = path.read_bytes()
        path.write_bytes(b'{"sentinel": true}')
        with make_client(tmp_path) as client:
            client._cache_store("NCT91000001", original)
        assert path.read_bytes() == b'{"sentinel": true}'

    def test_cold_cache_network_failure_is_transport_error(self, tmp_path):
        def dead(request):
            raise httpx.ConnectError("refused")

        with make_client(tmp_path, handler=dead, max_retries=1) as client:
            with pytest.raises(TransportError):
                client.fetch_trial("NCT91000001")

    def test_retryable_status_then_success(self, tmp_path):
        calls = {"n": 0}

        def flaky(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(503)
            return registry_handler(request)

        with make_client(tmp_path, handler=flaky) as client:
            record = client.fetch_trial("NCT91000001")
        assert record.nct_id == "NCT91000001"
        assert calls["n"] == 2

    def test_works_without_cache_dir(self):
        with make_client(None) as client:
            assert client.fetch_trial("NCT91000001").nct_id == "NCT91000001"


class TestParsePayload:
    def test_missing_start_date_rejected(self):
        doc = study_payload("NCT91000009")
        del doc["protocolSection"]["statusModule"]["startDateStruct"]
        with pytest.raises(ContractViolationError):
            parse_study_payload(json.dumps(doc).encode())

    def test_first_post_date_fallback(self):
        doc = study_payload("NCT91000009")
        status = doc["protocolSection"]["statusModule"]
        del status["startDateStruct"]
        status["studyFirstPostDateStruct"] = {"date": "2019"}
        record = parse_study_payload(json.dumps(doc).encode())
        assert record.open_date == date(2019, 1, 1)

    def test_close_before_open_clamped(self):
        doc = study_payload("NCT91000009", status="WITHDRAWN",
                            start="2021-05-05", completion="2020-01-01")
        record = parse_study_payload(json.dumps(doc).encode())
        assert record.close_date == record.open_date

    def test_garbage_payload_rejected(self):
        with pytest.raises(ContractViolationError):
            parse_study_payload(b"not json at all")
        with pytest.raises(ContractViolationError):
            parse_study_payload(b'{"protocolSection": {}}')


class TestListOpenTrials:
    def test_three_trials_across_two_pages(self):
        query = RegistryQuery(condition="cancer", as_of=date(2024, 10, 22))
        with make_client() as client:
            first = client.list_open_trials(query)
            second = client.list_open_trials(query)
        # page 2 repeats NCT91000001; dedup keeps first occurrence order
        assert first == ["NCT91000001", "NCT91000002", "NCT91000003"]
        assert second == first

    def test_recruiting_filter_sent(self):
        seen = {}

        def capture(request):
            seen.setdefault("status", request.url.params.get(
                "filter.overallStatus"))
            return registry_handler(request)

        query = RegistryQuery(condition="cancer", as_of=date(2024, 10, 22))
        with make_client(handler=capture) as client:
            client.list_open_trials(query)
        assert seen["status"] == "RECRUITING"

        seen.clear()
        any_query = RegistryQuery(condition="cancer",
                                  as_of=date(2024, 10, 22),
                                  status_filter=StatusFilter.ANY)
        with make_client(handler=capture) as client:
            client.list_open_trials(any_query)
        assert seen["status"] is None

    def test_empty_condition_rejected(self):
        with pytest.raises(ValueError):
            RegistryQuery(condition="   ", as_of=date(2024, 10, 22))

    def test_page_size_bounds(self):
        with pytest.raises(ValueError):
            RegistryQuery(condition="cancer", as_of=date(2024, 10, 22),
                          page_size=0)
        with pytest.raises(ValueError):
            RegistryQuery(condition="cancer", as_of=date(2024, 10, 22),
                          page_size=1001)


class TestSampleTrials:
    IDS = [f"NCT91{i:06d}" for i in range(1000)]

    def test_full_sample_is_sorted_set(self):
        shuffled = list(reversed(self.IDS))
        assert sample_trials(shuffled, 1000, seed=1) == sorted(self.IDS)

    def test_zero_sample_empty(self):
        assert sample_trials(self.IDS, 0, seed=1) == []

    def test_seed_reproducible(self):
        a = sample_trials(self.IDS, 500, seed=20241022)
        b = sample_trials(self.IDS, 500, seed=20241022)
        assert a == b
        assert len(a) == 500

    def test_input_order_irrelevant(self):
        import random as stdlib_random

        shuffled = list(self.IDS)
        stdlib_random.Random(99).shuffle(shuffled)
        assert sample_trials(shuffled, 500, seed=7) == \
               sample_trials(self.IDS, 500, seed=7)

    def test_different_seeds_differ(self):
        assert sample_trials(self.IDS, 500, seed=1) != \
               sample_trials(self.IDS, 500, seed=2)

    def test_oversample_rejected(self):
        with pytest.raises(ValueError):
            sample_trials(self.IDS[:10], 11, seed=1)

    @settings(max_examples=50, deadline=None)
    @given(st.sets(st.integers(0, 5000), min_size=1, max_size=80),
           st.integers(0, 2**63 - 1))
    def test_sample_is_sorted_distinct_subset(self, pool, seed):
        ids = [f"NCT91{i:06d}" for i in pool]
        n = len(ids) // 2
        got = sample_trials(ids, n, seed)
        assert len(got) == n
        assert len(set(got)) == n
        assert set(got) <= set(ids)
        assert got == sorted(got)


class TestTokenBucket:
    def test_burst_then_spaced(self):
        clock = {"t": 0.0}
        sleeps = []

        def fake_sleep(s):
            sleeps.append(s)
            clock["t"] += s

        bucket = TokenBucket(rate_per_s=2.0, capacity=2.0,
                             clock=lambda: clock["t"], sleep=fake_sleep)
        bucket.take()
        bucket.take()
        assert sleeps == []
        bucket.take()
        assert sleeps == [pytest.approx(0.5)]

    def test_refill_caps_at_capacity(self):
        clock = {"t": 0.0}
        bucket = TokenBucket(rate_per_s=2.0, capacity=2.0,
                             clock=lambda: clock["t"], sleep=lambda s: None)
        clock["t"] = 100.0
        bucket.take()
        bucket.take()
        assert bucket._tokens == pytest.approx(0.0)

    def test_bad_rate_rejected(self):
        with pytest.raises(ValueError):
            TokenBucket(rate_per_s=0.0)


needs_network = pytest.mark.skipif(
    os.environ.get("TRIALMATCH_INTEGRATION") != "1",
    reason="live registry tests need TRIALMATCH_INTEGRATION=1")


@needs_network
class TestLiveRegistry:
    def test_known_trial_has_criteria(self, tmp_path):
        with RegistryClient(cache_dir=tmp_path) as client:
            record = client.fetch_trial("NCT04644237")
        assert record.eligibility_text.strip()

    def test_open_cancer_trials_plentiful(self):
        query = RegistryQuery(condition="cancer", as_of=date.today(),
                              page_size=1000)
        with RegistryClient() as client:
            ids = client.list_open_trials(query)
        assert len(ids) > 1000
