"""Chat-completion clients for the four model roles.

Every model the system talks to (local reasoner, topic shifter, remote
solver, leakage judge) sits behind the same tiny interface: build a
``ChatRequest``, get back a ``ChatResponse``. Two implementations ship here:
an HTTP adapter for OpenAI-compatible endpoints and a scripted mock for
tests. Whatever the implementation, every request is appended verbatim to a
shared ``CallLog`` before dispatch; that log is what privacy assertions and
transmitted-payload records are built from.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import httpx

__all__ = [
    "ChatMessage",
    "Sampling",
    "ChatRequest",
    "ChatResponse",
    "ChatClient",
    "CallLog",
    "LoggedCall",
    "HttpChatClient",
    "MockChatClient",
    "TransportError",
    "MockExhausted",
    "request_fingerprint",
]

ROLE_TAGS = ("Local", "Shifter", "Remote", "Judge")


class TransportError(Exception):
    """The endpoint stayed unreachable or kept failing after retries."""


class MockExhausted(Exception):
    """A scripted mock ran out of fixtures; a test-authoring error."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class Sampling:
    """Decoding parameters. Greedy is temperature 0 with the full nucleus."""

    temperature: float = 1.0
    top_p: float = 0.9

    @classmethod
    def greedy(cls) -> "Sampling":
        return cls(temperature=0.0, top_p=1.0)

    @property
    def is_greedy(self) -> bool:
        return self.temperature == 0.0


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    sampling: Sampling
    max_tokens: int
    role_tag: str

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("empty message list")
        if not 0 < self.sampling.top_p <= 1:
            raise ValueError(f"top_p out of range: {self.sampling.top_p}")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    usage: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class LoggedCall:
    role: str
    request: ChatRequest


class CallLog:
    """Append-only, thread-safe record of every request, in dispatch order."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: list[LoggedCall] = []

    def append(self, role: str, request: ChatRequest) -> None:
        with self._lock:
            self._entries.append(LoggedCall(role, request))

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def mark(self) -> int:
        """Current length, for slicing out the calls of one pipeline stage."""
        return len(self)

    def entries(self, since: int = 0, role: str | None = None) -> tuple[LoggedCall, ...]:
        with self._lock:
            tail = self._entries[since:]
        if role is None:
            return tuple(tail)
        return tuple(e for e in tail if e.role == role)

    def transmitted_text(self, role: str, since: int = 0) -> str:
        """All message content sent to ``role``, concatenated."""
        parts = []
        for entry in self.entries(since, role):
            for msg in entry.request.messages:
                parts.append(msg.content)
        return "\n".join(parts)


class ChatClient(Protocol):
    def chat(self, request: ChatRequest) -> ChatResponse: ...


def request_fingerprint(request: ChatRequest) -> str:
    h = hashlib.sha256()
    h.update(request.role_tag.encode())
    for msg in request.messages:
        h.update(b"\x00")
        h.update(msg.role.encode())
        h.update(b"\x01")
        h.update(msg.content.encode())
    return h.hexdigest()


class HttpChatClient:
    """OpenAI-compatible chat-completions adapter.

    Posts to ``{base_url}/v1/chat/completions`` with a bearer token taken
    from ``api_key`` or the environment variable named by ``api_key_env``.
    Transient transport failures and 5xx responses are retried with
    exponential backoff.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        log: CallLog,
        *,
        api_key: str | None = None,
        api_key_env: str = "NUMVEIL_API_KEY",
        timeout: float = 120.0,
        max_retries: int = 3,
        transport: httpx.BaseTransport | None = None,
        backoff: float = 0.5,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.log = log
        self.max_retries = max_retries
        self.backoff = backoff
        key = api_key or os.environ.get(api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def chat(self, request: ChatRequest) -> ChatResponse:
        self.log.append(request.role_tag, request)
        payload = {
            "model": self.model,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "max_tokens": request.max_tokens,
        }
        url = f"{self.base_url}/v1/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(url, json=payload)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = TransportError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise TransportError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
            body = resp.json()
            try:
                choice = body["choices"][0]
                text = choice["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from exc
            return ChatResponse(
                text=text,
                finish_reason=choice.get("finish_reason", "stop"),
                usage=body.get("usage", {}),
            )
        raise TransportError(f"{url} failed after {self.max_retries} retries: {last_error}")

    def close(self) -> None:
        self._http.close()


ScriptedReply = str | Callable[[ChatRequest], str]


class MockChatClient:
    """Scripted client for tests.

    Replies come from ``responses`` in call order (per role tag), or, when a
    request's fingerprint is present in ``by_fingerprint``, from that table
    instead. Callables in the script receive the request and return text.
    """

    def __init__(
        self,
        responses: Sequence[ScriptedReply] = (),
        log: CallLog | None = None,
        *,
        by_fingerprint: Mapping[str, str] | None = None,
        cycle: bool = False,
    ) -> None:
        self.log = log if log is not None else CallLog()
        self._responses = list(responses)
        self._by_fingerprint = dict(by_fingerprint or {})
        self._cycle = cycle
        self._lock = threading.Lock()
        self._ordinals: dict[str, int] = {}

    def chat(self, request: ChatRequest) -> ChatResponse:
        self.log.append(request.role_tag, request)
        keyed = self._by_fingerprint.get(request_fingerprint(request))
        if keyed is not None:
            return ChatResponse(text=keyed)
        with self._lock:
            ordinal = self._ordinals.get(request.role_tag, 0)
            self._ordinals[request.role_tag] = ordinal + 1
        if not self._responses:
            raise MockExhausted(f"no scripted replies for {request.role_tag}")
        if ordinal >= len(self._responses):
            if not self._cycle:
                raise MockExhausted(
                    f"scripted replies exhausted for {request.role_tag} at call {ordinal}"
                )
            ordinal %= len(self._responses)
        reply = self._responses[ordinal]
        text = reply(request) if callable(reply) else reply
        return ChatResponse(text=text)
