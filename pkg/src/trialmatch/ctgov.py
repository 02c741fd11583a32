"""Trial-registry client: fetch eligibility criteria, enumerate open
trials, sample evaluation sets.

All network egress in the engine happens here, behind a token-bucket
rate limiter and a raw-payload disk cache, so everything downstream can
run against cached payloads or a mock transport.
"""

from __future__ import annotations

import json
import os
import random
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .datamodel import NCT_ID_RE, TrialRecord
from .errors import ContractViolationError, TransportError, TrialNotFoundError

DEFAULT_BASE_URL = "https://clinicaltrials.gov/api/v2"
ENDPOINT_VERSION = "v2"
REGISTRY_MAX_PAGE_SIZE = 1000
_RETRYABLE = frozenset({429, 500, 502, 503, 504})

_STUDY_FIELDS = ",".join([
    "protocolSection.identificationModule",
    "protocolSection.statusModule",
    "protocolSection.eligibilityModule",
])


class StatusFilter(str, Enum):
    RECRUITING_ONLY = "recruiting_only"
    ANY = "any"


@dataclass(frozen=True)
class RegistryQuery:
    """One enumeration request.

    as_of records the date the snapshot represents; the public registry
    only filters on current status, so as_of is provenance, not a
    historical filter.
    """

    condition: str
    as_of: date
    status_filter: StatusFilter = StatusFilter.RECRUITING_ONLY
    page_size: int = 100

    def __post_init__(self):
        if not self.condition.strip():
            raise ValueError("condition must be non-empty")
        if not 1 <= self.page_size <= REGISTRY_MAX_PAGE_SIZE:
            raise ValueError(
                f"page_size must be in [1, {REGISTRY_MAX_PAGE_SIZE}]")


@dataclass(frozen=True)
class FetchCacheEntry:
    nct_id: str
    retrieved_at: datetime
    payload: bytes


class TokenBucket:
    """Simple token bucket: capacity tokens, steady refill, blocking take."""

    def __init__(self, rate_per_s: float, capacity: float = 2.0,
                 clock=time.monotonic, sleep=time.sleep):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_s
        self.capacity = capacity
        self._tokens = capacity
        self._stamp = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def take(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity,
                                   self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


def _parse_registry_date(raw: Optional[str]) -> Optional[date]:
    """Registry dates come as YYYY, YYYY-MM, or YYYY-MM-DD; partial dates
    round down to the first day."""
    if not raw:
        return None
    parts = raw.split("-")
    try:
        year = int(parts[0])
        month = int(parts[1]) if len(parts) > 1 else 1
        day = int(parts[2]) if len(parts) > 2 else 1
        return date(year, month, day)
    except (ValueError, IndexError):
        return None


def parse_study_payload(payload: bytes) -> TrialRecord:
    """Map one registry study JSON to a TrialRecord.

    eligibility_text is kept exactly as provided, apart from newline
    canonicalization. close_date comes from the completion date unless
    the study is still recruiting, in which case the window stays open.
    """
    try:
        doc = json.loads(payload)
    except ValueError as exc:
        raise ContractViolationError(
            f"registry payload is not JSON: {exc}") from exc
    protocol = doc.get("protocolSection", {})
    ident = protocol.get("identificationModule", {})
    status = protocol.get("statusModule", {})
    eligibility = protocol.get("eligibilityModule", {})

    nct_id = ident.get("nctId", "")
    if not NCT_ID_RE.match(nct_id):
        raise ContractViolationError(
            f"registry payload has no usable NCT id: {nct_id!r}")
    criteria = eligibility.get("eligibilityCriteria", "")
    criteria = re.sub(r"\r\n?", "\n", criteria)

    open_date = None
    for field in ("startDateStruct", "studyFirstPostDateStruct"):
        open_date = _parse_registry_date(status.get(field, {}).get("date"))
        if open_date:
            break
    if open_date is None:
        open_date = _parse_registry_date(status.get("studyFirstSubmitDate"))
    if open_date is None:
        raise ContractViolationError(
            f"registry payload for {nct_id} carries no start date")

    overall = status.get("overallStatus", "")
    close_date = None
    if overall != "RECRUITING":
        close_date = _parse_registry_date(
            status.get("completionDateStruct", {}).get("date"))
        if close_date is not None and close_date < open_date:
            close_date = open_date

    return TrialRecord(nct_id=nct_id, eligibility_text=criteria,
                       open_date=open_date, title=ident.get("briefTitle"),
                       close_date=close_date,
                       extra={"overall_status": overall})


class RegistryClient:
    """HTTP client for the registry's v2 study API.

    Raw payloads cache to <cache_dir>/<nct_id>.v2.json, written once and
    never overwritten, so repeat fetches work with the network down.
    """

    def __init__(self,
                 base_url: str = DEFAULT_BASE_URL,
                 cache_dir: Optional[Path | str] = None,
                 rate_limit_per_s: float = 2.0,
                 timeout_s: float = 30.0,
                 max_retries: int = 3,
                 backoff_base_s: float = 0.5,
                 transport: Optional[httpx.BaseTransport] = None,
                 sleep=time.sleep):
        self.base_url = base_url.rstrip("/")
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._bucket = TokenBucket(rate_limit_per_s, sleep=sleep)
        self._max_retries = max_retries
        self._backoff_base_s = backoff_base_s
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- cache ---------------------------------------------------------

    def _cache_path(self, nct_id: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{nct_id}.{ENDPOINT_VERSION}.json"

    def cached_entry(self, nct_id: str) -> Optional[FetchCacheEntry]:
        path = self._cache_path(nct_id)
        if path is None or not path.exists():
            return None
        stamp = datetime.fromtimestamp(path.stat().st_mtime, timezone.utc)
        return FetchCacheEntry(nct_id=nct_id, retrieved_at=stamp,
                               payload=path.read_bytes())

    def _cache_store(self, nct_id: str, payload: bytes) -> None:
        path = self._cache_path(nct_id)
        if path is None or path.exists():
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)

    # -- http ----------------------------------------------------------

    def _get(self, url: str, params: dict) -> httpx.Response:
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                self._sleep(self._backoff_base_s * 2 ** (attempt - 1))
            self._bucket.take()
            try:
                response = self._client.get(url, params=params)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in _RETRYABLE:
                last_error = TransportError(
                    f"{url} returned {response.status_code}")
                continue
            return response
        raise TransportError(
            f"{url} failed after {self._max_retries + 1} attempts"
        ) from last_error

    # -- operations ----------------------------------------------------

    def fetch_trial(self, nct_id: str) -> TrialRecord:
        """Fetch one trial's record, preferring the on-disk cache."""
        if not NCT_ID_RE.match(nct_id or ""):
            raise ValueError(f"malformed NCT id: {nct_id!r}")
        entry = self.cached_entry(nct_id)
        if entry is not None:
            return parse_study_payload(entry.payload)
        response = self._get(f"{self.base_url}/studies/{nct_id}",
                             params={"fields": _STUDY_FIELDS,
                                     "format": "json"})
        if response.status_code == 404:
            raise TrialNotFoundError(f"registry has no trial {nct_id}")
        if response.status_code >= 400:
            raise TransportError(
                f"registry returned {response.status_code} for {nct_id}")
        payload = response.content
        record = parse_study_payload(payload)
        self._cache_store(nct_id, payload)
        return record

    def list_open_trials(self, query: RegistryQuery) -> list[str]:
        """Enumerate matching trial ids across all pages, deduplicated,
        in registry order."""
        params: dict = {"query.cond": query.condition,
                        "pageSize": query.page_size,
                        "fields": "protocolSection.identificationModule",
                        "format": "json"}
        if query.status_filter is StatusFilter.RECRUITING_ONLY:
            params["filter.overallStatus"] = "RECRUITING"
        seen: set[str] = set()
        ordered: list[str] = []
        page_token: Optional[str] = None
        while True:
            page_params = dict(params)
            if page_token:
                page_params["pageToken"] = page_token
            response = self._get(f"{self.base_url}/studies", page_params)
            if response.status_code >= 400:
                raise TransportError(
                    f"registry search returned {response.status_code}")
            doc = response.json()
            for study in doc.get("studies", []):
                nct_id = (study.get("protocolSection", {})
                          .get("identificationModule", {})
                          .get("nctId"))
                if nct_id and nct_id not in seen:
                    seen.add(nct_id)
                    ordered.append(nct_id)
            page_token = doc.get("nextPageToken")
            if not page_token:
                return ordered


def sample_trials(ids: Sequence[str], n: int, seed: int) -> list[str]:
    """Uniform sample of n distinct ids, reproducible from the seed and
    independent of input order; result sorted by id."""
    pool = sorted(set(ids))
    if n < 0 or n > len(pool):
        raise ValueError(
            f"cannot sample {n} from {len(pool)} distinct ids")
    return sorted(random.Random(seed).sample(pool, n))
