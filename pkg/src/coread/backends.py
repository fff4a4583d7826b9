"""Chat-completion backends: live HTTP client, scripted test double, record/replay."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-3.5-turbo"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call. ``request_tag`` labels the caller's intent
    (e.g. ``generate:openEnded``) and never reaches the wire."""

    messages: tuple[ChatMessage, ...]
    model: str
    temperature: float
    max_tokens: int
    request_tag: str

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("the first message role must be 'system' or 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict)
    latency_ms: int = 0

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "finish_reason": self.finish_reason,
            "usage": dict(self.usage),
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ChatResponse":
        return cls(
            content=payload["content"],
            finish_reason=payload.get("finish_reason", "stop"),
            usage=dict(payload.get("usage", {})),
            latency_ms=int(payload.get("latency_ms", 0)),
        )


class BackendError(RuntimeError):
    """Base class for completion-backend failures."""


class TransportError(BackendError):
    """The live endpoint could not be reached or returned an error status."""


class ScriptedExhaustedError(BackendError):
    """A scripted backend had no canned response left for a request tag."""


class ReplayCacheMissError(BackendError):
    """Strict replay saw a request that was never recorded."""

    def __init__(self, digest: str) -> None:
        super().__init__(f"no recorded response for request digest {digest}")
        self.digest = digest


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def request_digest(request: ChatRequest) -> str:
    """Stable content digest over messages, model, and temperature.

    Insensitive to request_tag and max_tokens, so a replayed request matches
    its recording regardless of caller-side labelling.
    """
    payload = {
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "model": request.model,
        "temperature": request.temperature,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ScriptedBackend:
    """Test backend that pops canned responses per request tag.

    Also records every request it sees, so tests can assert on call counts,
    tag sequences, and rendered prompt content.
    """

    def __init__(self, responses: dict[str, list[str]] | None = None) -> None:
        self._queues: dict[str, list[str]] = {
            tag: list(items) for tag, items in (responses or {}).items()
        }
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def add(self, tag: str, *contents: str) -> None:
        self._queues.setdefault(tag, []).extend(contents)

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def tags_seen(self) -> list[str]:
        return [request.request_tag for request in self.requests]

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            queue = self._queues.get(request.request_tag)
            if not queue:
                raise ScriptedExhaustedError(
                    f"no scripted response left for request_tag '{request.request_tag}'"
                )
            content = queue.pop(0)
        return ChatResponse(content=content, finish_reason="stop", usage={}, latency_ms=0)


@dataclass(frozen=True)
class LiveBackendConfig:
    """Connection settings for an endpoint speaking the standard
    chat-completion wire format."""

    base_url: str
    path: str = "/v1/chat/completions"
    api_key_env: str = "OPENAI_API_KEY"
    attempts: int = 3
    timeout_s: float = 30.0


class LiveBackend:
    """HTTP client for a chat-completion endpoint.

    Safe for concurrent ``complete`` calls. Transient failures (transport
    errors, HTTP 429/5xx) are retried with exponential backoff up to the
    configured attempt cap; other HTTP errors fail immediately.
    """

    def __init__(
        self,
        config: LiveBackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self._config = config
        self._sleep = sleep
        headers = {}
        api_key = os.environ.get(config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=config.base_url,
            headers=headers,
            timeout=config.timeout_s,
            transport=transport,
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self._config.attempts):
            if attempt:
                self._sleep(2 ** (attempt - 1))
            started = time.monotonic()
            try:
                response = self._client.post(self._config.path, json=body)
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("completion transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(
                    f"HTTP {response.status_code} from completion endpoint"
                )
                logger.warning("retriable completion status %d (attempt %d)",
                               response.status_code, attempt + 1)
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"HTTP {response.status_code} from completion endpoint: "
                    f"{response.text[:200]}"
                )
            payload = response.json()
            try:
                choice = payload["choices"][0]
                content = choice["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
            return ChatResponse(
                content=content,
                finish_reason=choice.get("finish_reason", "stop"),
                usage=dict(payload.get("usage", {})),
                latency_ms=int((time.monotonic() - started) * 1000),
            )
        raise TransportError(
            f"completion failed after {self._config.attempts} attempts: {last_error}"
        ) from last_error


class ReplayBackend:
    """Cassette-backed backend keyed by :func:`request_digest`.

    With an ``inner`` backend, cache misses are forwarded and the response
    recorded. Without one (strict mode), a miss raises
    :class:`ReplayCacheMissError`. Cache writes are serialized.
    """

    def __init__(self, cassette_dir: Path | str, inner: ChatBackend | None = None) -> None:
        self._dir = Path(cassette_dir)
        self._inner = inner
        self._lock = threading.Lock()

    def _path(self, digest: str) -> Path:
        return self._dir / f"{digest}.json"

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request)
        path = self._path(digest)
        if path.exists():
            payload = json.loads(path.read_text("utf-8"))
            return ChatResponse.from_dict(payload["response"])
        if self._inner is None:
            raise ReplayCacheMissError(digest)
        response = self._inner.complete(request)
        record = {
            "request": {
                "messages": [{"role": m.role, "content": m.content} for m in request.messages],
                "model": request.model,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "request_tag": request.request_tag,
            },
            "response": response.to_dict(),
        }
        with self._lock:
            self._dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record, indent=2, ensure_ascii=False), "utf-8")
            os.replace(tmp, path)
        return response
