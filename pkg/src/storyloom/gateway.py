"""Chat-completion access: a real OpenAI-compatible HTTP client and a
deterministic scripted stand-in for offline runs and CI.

Everything else in the engine depends only on the ``complete(messages)``
callable surface, so the two are interchangeable.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .errors import MalformedResponse, NoScriptedMatch, TransportError, UpstreamStatus

logger = logging.getLogger(__name__)

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"

# Exponential backoff for retryable failures: 250 ms base, doubled per
# retry, +/-20% jitter.
BACKOFF_BASE_S = 0.25
BACKOFF_JITTER = 0.2

# Sampling defaults: play at 0.7, rule judgments at 0.0 for stability.
PLAY_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


def user_message(content: str) -> ChatMessage:
    return ChatMessage(role="user", content=content)


def system_message(content: str) -> ChatMessage:
    return ChatMessage(role="system", content=content)


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach a chat-completions endpoint (local or hosted)."""

    base_url: str
    model: str
    api_key: str | None = None
    temperature: float = PLAY_TEMPERATURE
    max_tokens: int = 1024
    timeout_ms: int = 60_000
    max_retries: int = 2

    def __post_init__(self):
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    def with_env_overrides(self) -> "EndpointConfig":
        """Apply LLM_BASE_URL / LLM_API_KEY / LLM_MODEL over file values."""
        return EndpointConfig(
            base_url=os.environ.get("LLM_BASE_URL", self.base_url),
            model=os.environ.get("LLM_MODEL", self.model),
            api_key=os.environ.get("LLM_API_KEY", self.api_key),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            timeout_ms=self.timeout_ms,
            max_retries=self.max_retries,
        )


class Gateway(Protocol):
    def complete(self, messages: list[ChatMessage]) -> str: ...


def _backoff_sleep(attempt: int) -> None:
    delay = BACKOFF_BASE_S * (2**attempt)
    delay *= 1.0 + random.uniform(-BACKOFF_JITTER, BACKOFF_JITTER)
    time.sleep(delay)


def request_body(messages: list[ChatMessage], config: EndpointConfig) -> dict:
    return {
        "model": config.model,
        "messages": [m.to_wire() for m in messages],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def complete(messages: list[ChatMessage], config: EndpointConfig) -> str:
    """POST the chat request and return the first choice's message content.

    Transport failures and 5xx statuses are retried up to
    ``config.max_retries`` with exponential backoff; 4xx statuses fail
    immediately. Messages are never mutated, so identical calls serialize
    to identical request bodies.
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    url = config.base_url.rstrip("/") + CHAT_COMPLETIONS_PATH
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = request_body(messages, config)
    timeout = config.timeout_ms / 1000.0

    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt > 0:
            _backoff_sleep(attempt - 1)
        try:
            response = httpx.post(url, json=body, headers=headers, timeout=timeout)
        except httpx.HTTPError as exc:
            last_error = exc
            logger.warning("transport failure on attempt %d: %s", attempt + 1, exc)
            continue
        if 200 <= response.status_code < 300:
            return _first_choice_content(response)
        if response.status_code >= 500:
            last_error = UpstreamStatus(response.status_code, response.text[:200])
            logger.warning("upstream 5xx on attempt %d: %s", attempt + 1, response.status_code)
            continue
        raise UpstreamStatus(response.status_code, response.text[:200])

    if isinstance(last_error, UpstreamStatus):
        raise last_error
    raise TransportError(f"request failed after {config.max_retries + 1} attempts: {last_error}")


def _first_choice_content(response: httpx.Response) -> str:
    try:
        payload = response.json()
        content = payload["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no parsable choice in response: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponse(f"choice content is not text: {type(content).__name__}")
    return content


class HttpGateway:
    """Gateway over a live OpenAI-compatible endpoint."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def complete(self, messages: list[ChatMessage]) -> str:
        return complete(messages, self.config)


@dataclass(frozen=True)
class ScriptedRule:
    """Deterministic canned response: match the prompt text, reply with ``response``.

    Lower priority wins; equal priorities keep listing order.
    """

    matcher: str
    response: str
    priority: int = 0
    regex: bool = False

    def matches(self, text: str) -> bool:
        if self.regex:
            return re.search(self.matcher, text) is not None
        return self.matcher in text


def scripted_complete(
    messages: list[ChatMessage],
    rules: list[ScriptedRule],
    default: str | None = None,
) -> str:
    """Pure function of (messages, rules, default): first match by priority."""
    text = "\n".join(m.content for m in messages)
    for rule in sorted(rules, key=lambda r: r.priority):
        if rule.matches(text):
            return rule.response
    if default is not None:
        return default
    raise NoScriptedMatch("no scripted rule matched and no default configured")


@dataclass
class ScriptedGateway:
    """Scripted LLM double that also records every call for assertions."""

    rules: list[ScriptedRule] = field(default_factory=list)
    default: str | None = None

    def __post_init__(self):
        self.calls: list[list[ChatMessage]] = []
        self._lock = threading.Lock()

    def complete(self, messages: list[ChatMessage]) -> str:
        with self._lock:
            self.calls.append(list(messages))
        return scripted_complete(messages, self.rules, self.default)

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def prompt_texts(self) -> list[str]:
        """One concatenated prompt string per recorded call."""
        return ["\n".join(m.content for m in call) for call in self.calls]

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedGateway":
        """Load a fixtures file: {"rules": [{matcher, response, priority, regex}], "default": ...}."""
        data = json.loads(Path(path).read_text())
        rules = [
            ScriptedRule(
                matcher=str(r["matcher"]),
                response=str(r["response"]),
                priority=int(r.get("priority", 0)),
                regex=bool(r.get("regex", False)),
            )
            for r in data.get("rules", [])
        ]
        return cls(rules=rules, default=data.get("default"))
