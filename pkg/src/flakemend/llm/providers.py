"""Completion providers behind one interface: HTTP chat API, replay fixtures, recording, scripted."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

import httpx

REPLAY_FORMAT = "flakemend-replay"
REPLAY_VERSION = 1


class ProviderError(RuntimeError):
    """Transport, timeout or protocol failure while talking to a provider."""


class FixtureMiss(LookupError):
    def __init__(self, digest: str):
        super().__init__(f"no recorded response for prompt digest {digest}")
        self.digest = digest


class ProviderKind(str, Enum):
    HTTP_API = "HTTP_API"
    REPLAY = "REPLAY"


@dataclass(frozen=True)
class ProviderConfig:
    """Provider settings.  Credentials are referenced by environment variable name only."""

    kind: ProviderKind
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = "FLAKEMEND_API_KEY"
    fixture_path: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 2048
    request_timeout_s: float = 120.0
    request_path: str = "/v1/chat/completions"
    response_text_path: str = "choices.0.message.content"
    tokens_in_path: str = "usage.prompt_tokens"
    tokens_out_path: str = "usage.completion_tokens"
    char_budget: int = 24_000

    def __post_init__(self) -> None:
        if self.kind is ProviderKind.REPLAY and not self.fixture_path:
            raise ValueError("REPLAY providers need a fixture_path")
        if self.kind is ProviderKind.HTTP_API and not self.endpoint:
            raise ValueError("HTTP_API providers need an endpoint")
        if self.max_output_tokens <= 0 or self.request_timeout_s <= 0 or self.char_budget <= 0:
            raise ValueError("limits must be positive")

    def describe(self) -> dict[str, Any]:
        """Settings safe to persist: everything except credential material."""
        return {
            "kind": self.kind.value,
            "endpoint": self.endpoint,
            "model": self.model,
            "fixture_path": self.fixture_path,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ProviderConfig":
        raw = dict(raw)
        if "api_key" in raw:
            raise ValueError("put the API key in an environment variable and name it with api_key_env")
        raw["kind"] = ProviderKind(raw.get("kind", "HTTP_API"))
        return cls(**raw)


@dataclass(frozen=True)
class Completion:
    text: str
    tokens_in: int = 0
    tokens_out: int = 0
    latency_s: float = 0.0

    def __post_init__(self) -> None:
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("negative token count")


def prompt_digest(prompt_text: str) -> str:
    """SHA-256 of the exact UTF-8 prompt text."""
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


class Provider(ABC):
    @abstractmethod
    def complete(self, prompt_text: str) -> Completion:
        ...

    def close(self) -> None:
        pass


def _dig(doc: Any, path: str) -> Any:
    for part in path.split("."):
        if isinstance(doc, list) and part.isdigit():
            doc = doc[int(part)] if int(part) < len(doc) else None
        elif isinstance(doc, dict):
            doc = doc.get(part)
        else:
            return None
        if doc is None:
            return None
    return doc


class HttpProvider(Provider):
    """Single-turn OpenAI-style chat completion over HTTP; one retry on transient failures."""

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(config.api_key_env) if config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(base_url=config.endpoint, headers=headers, timeout=config.request_timeout_s,
                                    transport=transport)

    def _payload(self, prompt_text: str) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        if self.config.model:
            payload["model"] = self.config.model
        return payload

    def complete(self, prompt_text: str) -> Completion:
        last: Exception | None = None
        for _ in range(2):
            start = time.monotonic()
            try:
                resp = self._client.post(self.config.request_path, json=self._payload(prompt_text))
            except httpx.HTTPError as exc:
                last = exc
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = ProviderError(f"provider answered HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"provider rejected the request with HTTP {resp.status_code}")
            try:
                doc = resp.json()
            except ValueError as exc:
                raise ProviderError("provider returned invalid JSON") from exc
            text = _dig(doc, self.config.response_text_path)
            if not isinstance(text, str):
                raise ProviderError(f"no text at {self.config.response_text_path!r} in provider response")
            return Completion(
                text,
                int(_dig(doc, self.config.tokens_in_path) or 0),
                int(_dig(doc, self.config.tokens_out_path) or 0),
                time.monotonic() - start,
            )
        raise ProviderError(f"provider call failed twice: {type(last).__name__}") from last

    def close(self) -> None:
        self._client.close()


def load_fixture(path: str | Path) -> dict[str, dict[str, Any]]:
    p = Path(path)
    if not p.exists():
        return {}
    doc = json.loads(p.read_text(encoding="utf-8"))
    if doc.get("format") != REPLAY_FORMAT or doc.get("version") != REPLAY_VERSION:
        raise ValueError(f"{path} is not a {REPLAY_FORMAT} v{REPLAY_VERSION} file")
    return dict(doc.get("entries", {}))


def save_fixture(path: str | Path, entries: dict[str, dict[str, Any]]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format": REPLAY_FORMAT, "version": REPLAY_VERSION, "digest": "sha256",
           "entries": dict(sorted(entries.items()))}
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    os.replace(tmp, p)


class ReplayProvider(Provider):
    def __init__(self, fixture_path: str | Path):
        self.entries = load_fixture(fixture_path)

    def complete(self, prompt_text: str) -> Completion:
        digest = prompt_digest(prompt_text)
        entry = self.entries.get(digest)
        if entry is None:
            raise FixtureMiss(digest)
        return Completion(entry["response"], entry.get("tokens_in", 0), entry.get("tokens_out", 0), 0.0)


class RecordingProvider(Provider):
    """Forward to ``inner`` and persist every (digest, response) pair for later replay."""

    def __init__(self, inner: Provider, fixture_path: str | Path):
        self.inner = inner
        self.fixture_path = Path(fixture_path)
        self.entries = load_fixture(self.fixture_path)
        self._lock = threading.Lock()

    def complete(self, prompt_text: str) -> Completion:
        result = self.inner.complete(prompt_text)
        with self._lock:
            self.entries[prompt_digest(prompt_text)] = {
                "response": result.text, "tokens_in": result.tokens_in, "tokens_out": result.tokens_out,
            }
            save_fixture(self.fixture_path, self.entries)
        return result

    def close(self) -> None:
        self.inner.close()


class ScriptedProvider(Provider):
    """Responses chosen by a function of the prompt, or served from a list (the last one repeats)."""

    def __init__(self, responses: Iterable[str] | Callable[[str], str]):
        self._fn = responses if callable(responses) else None
        self._queue = [] if callable(responses) else list(responses)
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, prompt_text: str) -> Completion:
        with self._lock:
            self.prompts.append(prompt_text)
            if self._fn is not None:
                text = self._fn(prompt_text)
            else:
                if not self._queue:
                    raise ProviderError("scripted provider has no responses")
                text = self._queue.pop(0) if len(self._queue) > 1 else self._queue[0]
        return Completion(text, tokens_in=len(prompt_text) // 4, tokens_out=len(text) // 4)


def make_provider(config: ProviderConfig, transport: httpx.BaseTransport | None = None) -> Provider:
    if config.kind is ProviderKind.REPLAY:
        return ReplayProvider(config.fixture_path)
    return HttpProvider(config, transport=transport)


def complete(prompt_text: str, config: ProviderConfig) -> Completion:
    provider = make_provider(config)
    try:
        return provider.complete(prompt_text)
    finally:
        provider.close()
