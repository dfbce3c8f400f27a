"""Provider-agnostic completion boundary.

Two backends speak the same ``send(prompt, params) -> text`` contract: a
deterministic scripted mock for offline runs and tests, and an HTTP backend
speaking the common chat-completion wire protocol. Every call is recorded in
an append-only transcript.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .errors import AuthFailed, EmptyScript, GatewayError, TimedOut, Unavailable

DEFAULT_HTTP_DEADLINE = 90.0  # seconds; observed real-model latencies run long
DEFAULT_MOCK_DEADLINE = 1.0

ENV_API_KEY = "LLM_API_KEY"
ENV_BASE_URL = "LLM_BASE_URL"
ENV_MODEL = "LLM_MODEL"


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.0
    max_tokens: int = 2048
    deadline: float = DEFAULT_HTTP_DEADLINE
    model_name: str = ""

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")


@dataclass(frozen=True)
class TranscriptEntry:
    prompt: str
    response: str
    latency: float
    backend: str

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "response": self.response,
            "latency": self.latency,
            "backend": self.backend,
        }


class Transcript:
    """Append-only record of every completion call in a session."""

    def __init__(self):
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()

    def record(self, prompt: str, response: str, latency: float, backend: str) -> None:
        with self._lock:
            self._entries.append(TranscriptEntry(prompt, response, latency, backend))

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.entries)


class Backend(Protocol):
    name: str

    def send(self, prompt: str, params: CompletionParams) -> str: ...


@dataclass(frozen=True)
class _MockRule:
    response: str
    substring: str | None = None
    index: int | None = None
    delay: float = 0.0

    def matches(self, prompt: str, call_index: int) -> bool:
        if self.index is not None:
            return call_index == self.index
        if self.substring is not None:
            return self.substring in prompt
        return False


class MockBackend:
    """Scripted backend: answers by the first matching rule.

    Rules match on a prompt substring or on the 0-based call index; prompts
    matching no rule raise Unavailable.
    """

    name = "mock"

    def __init__(self, rules: list[_MockRule]):
        if not rules:
            raise EmptyScript("mock script has no rules")
        self.rules = rules
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, prompt: str, params: CompletionParams) -> str:
        with self._lock:
            call_index = self.calls
            self.calls += 1
        for rule in self.rules:
            if rule.matches(prompt, call_index):
                if rule.delay:
                    time.sleep(rule.delay)
                return rule.response
        raise Unavailable(f"mock script has no rule for call {call_index}")


def mock_load(script: list) -> MockBackend:
    """Build a mock backend from a list of matcher/response records.

    Each record carries ``response`` (string, or any JSON value which is
    serialized) plus either ``substring`` or ``index``; optional ``delay``
    simulates latency in seconds.
    """
    rules = []
    for i, item in enumerate(script):
        if not isinstance(item, dict) or "response" not in item:
            raise EmptyScript(f"script rule {i} lacks a response")
        if "substring" not in item and "index" not in item:
            raise EmptyScript(f"script rule {i} lacks a matcher (substring or index)")
        response = item["response"]
        if not isinstance(response, str):
            response = json.dumps(response)
        rules.append(
            _MockRule(
                response=response,
                substring=item.get("substring"),
                index=item.get("index"),
                delay=float(item.get("delay", 0.0)),
            )
        )
    return MockBackend(rules)


def load_mock_script(path: str | Path) -> MockBackend:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise EmptyScript(f"mock script {path} must be a JSON list of rules")
    return mock_load(data)


class HttpBackend:
    """Chat-completion HTTP backend; base URL and key come from configuration."""

    def __init__(self, base_url: str, api_key: str | None, model_name: str = "", client: httpx.Client | None = None):
        if not api_key:
            raise AuthFailed(f"no API key configured (set {ENV_API_KEY})")
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model_name = model_name
        self.name = f"http:{self.base_url}"
        self._client = client or httpx.Client()

    def payload(self, prompt: str, params: CompletionParams) -> dict:
        return {
            "model": params.model_name or self.model_name,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        }

    def send(self, prompt: str, params: CompletionParams) -> str:
        try:
            resp = self._client.post(
                f"{self.base_url}/chat/completions",
                json=self.payload(prompt, params),
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=params.deadline,
            )
        except httpx.TimeoutException as e:
            raise TimedOut(f"backend exceeded {params.deadline}s deadline") from e
        except httpx.HTTPError as e:
            raise Unavailable(f"backend request failed: {e}") from e
        if resp.status_code in (401, 403):
            raise AuthFailed(f"backend rejected credentials (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise Unavailable(f"backend returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as e:
            raise Unavailable(f"backend response malformed: {e}") from e


def complete(
    prompt: str,
    params: CompletionParams,
    backend: Backend,
    transcript: Transcript | None = None,
) -> str:
    """Run one completion, record it, and enforce the deadline."""
    start = time.monotonic()
    try:
        text = backend.send(prompt, params)
    except GatewayError as e:
        if transcript is not None:
            transcript.record(prompt, f"<error: {e.code}>", time.monotonic() - start, backend.name)
        raise
    latency = time.monotonic() - start
    if transcript is not None:
        transcript.record(prompt, text, latency, backend.name)
    if latency > params.deadline:
        raise TimedOut(f"backend answered after {latency:.3f}s, deadline {params.deadline}s")
    return text


@dataclass
class Gateway:
    """A backend bound to default params and a session transcript."""

    backend: Backend
    params: CompletionParams = field(default_factory=CompletionParams)
    transcript: Transcript = field(default_factory=Transcript)

    def complete(self, prompt: str, params: CompletionParams | None = None) -> str:
        return complete(prompt, params or self.params, self.backend, self.transcript)


def gateway_from_flag(flag: str | None) -> Gateway | None:
    """Build a gateway from the CLI's ``--llm`` flag value.

    ``mock:<script-file>`` runs fully offline; ``http:<base-url>`` reads the
    API key and model from the environment. None means no gateway (the
    pipeline degrades to data relations and fallback placement).
    """
    if flag is None or flag == "":
        return None
    if flag.startswith("mock:"):
        backend = load_mock_script(flag[len("mock:"):])
        return Gateway(backend=backend, params=CompletionParams(deadline=DEFAULT_MOCK_DEADLINE))
    if flag.startswith("http:"):
        base_url = flag[len("http:"):]
        if base_url.startswith("//"):
            base_url = "http:" + base_url
        if not base_url:
            base_url = os.environ.get(ENV_BASE_URL, "")
        if not base_url:
            raise Unavailable(f"no base URL given (use http:<base-url> or set {ENV_BASE_URL})")
        backend = HttpBackend(
            base_url=base_url,
            api_key=os.environ.get(ENV_API_KEY),
            model_name=os.environ.get(ENV_MODEL, ""),
        )
        params = CompletionParams(model_name=backend.model_name)
        return Gateway(backend=backend, params=params)
    raise EmptyScript(f"unrecognized --llm value {flag!r}; use mock:<file> or http:<url>")
