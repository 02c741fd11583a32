"""Chat-completion provider abstraction, HTTP client, and response cache.

Every LLM call in the pipeline goes through a ChatProvider. The HTTP
implementation speaks the common /chat/completions JSON contract; the
deterministic offline implementation lives in trialmatch.llm.mock.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, runtime_checkable

import httpx

from ..errors import TransportError

Role = str  # "system" | "user" | "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str


@dataclass(frozen=True)
class LlmRequest:
    """One rendered chat call.

    template_id and bindings are advisory metadata for in-process providers
    (the mock keys its fixture generators off them); the HTTP provider sends
    only model, messages, and decoding parameters.
    """

    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    template_id: Optional[str] = None
    bindings: Optional[tuple[tuple[str, str], ...]] = None


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0


@runtime_checkable
class ChatProvider(Protocol):
    def complete(self, request: LlmRequest) -> LlmResponse: ...


def request_key(request: LlmRequest) -> str:
    """Content address of a request: SHA-256 over model, messages, and
    decoding parameters. Template metadata is deliberately excluded so the
    cache behaves identically for HTTP and in-process providers."""
    doc = {
        "max_tokens": request.max_tokens,
        "messages": [{"content": m.content, "role": m.role}
                     for m in request.messages],
        "model": request.model,
        "temperature": request.temperature,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed on-disk response cache.

    One JSON file per request key. Writes go through a temp file and
    os.replace so concurrent readers never observe a partial file.
    """

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[LlmResponse]:
        try:
            with open(self._path(key), encoding="utf-8") as fh:
                doc = json.load(fh)
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        return LlmResponse(
            text=doc["text"],
            prompt_tokens=doc.get("prompt_tokens", 0),
            completion_tokens=doc.get("completion_tokens", 0),
            latency_s=doc.get("latency_s", 0.0),
        )

    def put(self, key: str, response: LlmResponse) -> None:
        doc = {
            "text": response.text,
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
            "latency_s": response.latency_s,
        }
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, ensure_ascii=False)
            os.replace(tmp, self._path(key))
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


@dataclass
class CachingProvider:
    """Wraps any provider with the content-addressed cache. With the cache
    warm, a repeated identical request makes zero inner calls."""

    inner: ChatProvider
    cache: ResponseCache

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = request_key(request)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        response = self.inner.complete(request)
        self.cache.put(key, response)
        return response


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class HttpChatProvider:
    """OpenAI-style chat-completion client.

    Auth token comes from the environment variable named by api_key_env; a
    missing variable just sends no Authorization header (local inference
    servers usually don't check). Transient failures retry with exponential
    backoff; anything else raises TransportError.
    """

    base_url: str
    api_key_env: str = "TRIALMATCH_API_KEY"
    timeout_s: float = 120.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    max_in_flight: int = 4
    _client: Optional[httpx.Client] = field(default=None, repr=False)
    _sem: Optional[threading.Semaphore] = field(default=None, repr=False)

    def __post_init__(self):
        headers = {}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=self.base_url, headers=headers, timeout=self.timeout_s)
        self._sem = threading.Semaphore(self.max_in_flight)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def complete(self, request: LlmRequest) -> LlmResponse:
        payload = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content}
                         for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_err: Optional[str] = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            started = time.monotonic()
            try:
                with self._sem:
                    resp = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_err = f"transport failure: {exc}"
                continue
            if resp.status_code in _RETRYABLE_STATUS:
                last_err = f"status {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise TransportError(
                    f"chat completion failed with status {resp.status_code}: "
                    f"{resp.text[:500]}")
            doc = resp.json()
            try:
                text = doc["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise TransportError(
                    f"malformed chat completion payload: {exc}") from exc
            usage = doc.get("usage") or {}
            return LlmResponse(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                latency_s=time.monotonic() - started,
            )
        raise TransportError(
            f"chat completion failed after {self.max_retries + 1} attempts "
            f"({last_err})")
