"""Chat-completion clients: a generic HTTP client and a replay mock.

Wire protocol is the common chat-completion shape: JSON POST of
{model, messages, temperature}, answer read from choices[0].message.content.
Auth is a bearer token taken from a named environment variable.

Retries: a request is attempted up to max_retries + 1 times on transport
failures, with exponential backoff capped at backoff_cap. The jitter
factor is derived from (retry_seed, request_key, attempt), so delays are
deterministic even under concurrent requests.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import requests

from ..errors import ConfigError, FixtureMiss, LlmError, PromptTooLong, TransportError
from ..seeds import mix

Message = Mapping[str, str]


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str | None = None
    model: str = "default"
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    auth_env: str | None = None  # name of the env var holding the bearer token
    extra_headers: Mapping[str, str] = field(default_factory=dict)
    backoff_base: float = 0.25
    backoff_cap: float = 8.0
    retry_seed: int = 0
    max_prompt_chars: int | None = None
    failure_limit: float = 0.1  # abort a labeling run above this failure fraction

    def __post_init__(self):
        if self.temperature < 0.0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_in_flight < 1:
            raise ConfigError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if not 0.0 <= self.failure_limit <= 1.0:
            raise ConfigError(f"failure_limit must be in [0,1], got {self.failure_limit}")


class LlmClient:
    """Base client: retry loop around a single-attempt `_attempt`."""

    def __init__(self, config: LlmClientConfig, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep

    def retry_delay(self, request_key: str | None, attempt: int) -> float:
        """Deterministic backoff before retry `attempt` (1-based)."""
        base = min(
            self.config.backoff_cap, self.config.backoff_base * 2 ** (attempt - 1)
        )
        jitter = mix(self.config.retry_seed, request_key, attempt) / float(2**63)
        return base * (0.5 + jitter)

    def complete(self, messages: Sequence[Message], request_key: str | None = None) -> str:
        if self.config.max_prompt_chars is not None:
            total = sum(len(m.get("content", "")) for m in messages)
            if total > self.config.max_prompt_chars:
                raise PromptTooLong(
                    f"prompt is {total} chars, limit {self.config.max_prompt_chars}"
                )
        last: TransportError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                self._sleep(self.retry_delay(request_key, attempt))
            try:
                return self._attempt(messages, request_key)
            except TransportError as e:
                last = e
        raise TransportError(
            f"giving up after {self.config.max_retries + 1} attempts: {last}"
        ) from last

    def _attempt(self, messages: Sequence[Message], request_key: str | None) -> str:
        raise NotImplementedError


class HttpChatClient(LlmClient):
    def __init__(self, config: LlmClientConfig, sleep: Callable[[float], None] = time.sleep):
        super().__init__(config, sleep)
        if not config.endpoint:
            raise ConfigError("HTTP client needs an endpoint URL")
        self._headers = {"Content-Type": "application/json", **config.extra_headers}
        if config.auth_env is not None:
            token = os.environ.get(config.auth_env)
            if not token:
                raise ConfigError(
                    f"auth environment variable {config.auth_env!r} is unset"
                )
            self._headers["Authorization"] = f"Bearer {token}"

    def _attempt(self, messages, request_key):
        payload = {
            "model": self.config.model,
            "messages": [dict(m) for m in messages],
            "temperature": self.config.temperature,
        }
        try:
            resp = requests.post(
                self.config.endpoint,
                json=payload,
                headers=self._headers,
                timeout=self.config.timeout,
            )
        except requests.RequestException as e:
            raise TransportError(f"request failed: {e}") from e
        if not 200 <= resp.status_code < 300:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed completion body: {e}") from e


@dataclass
class FixtureEntry:
    """One scripted response.

    match_mode "by_id" answers any request whose key equals `key`;
    "sequence" entries answer unmatched requests in file order, advancing
    only once delivered. `failures_before_success` injects that many
    transport errors first.
    """

    match_mode: str
    response: str
    key: str | None = None
    failures_before_success: int = 0
    latency_ms: int = 0

    def __post_init__(self):
        if self.match_mode not in ("sequence", "by_id"):
            raise LlmError(f"unknown fixture match mode {self.match_mode!r}")
        if self.match_mode == "by_id" and not self.key:
            raise LlmError("by_id fixture entry needs a key")


def load_fixture(path: str) -> list[FixtureEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise LlmError(f"{path}:{line_no}: invalid fixture JSON ({e.msg})") from e
            match = rec.get("match", {})
            unknown = set(rec) - {"match", "response", "failures_before_success", "latency_ms"}
            if unknown or "response" not in rec:
                raise LlmError(
                    f"{path}:{line_no}: malformed fixture entry "
                    f"(unknown keys {sorted(unknown)})" if unknown
                    else f"{path}:{line_no}: fixture entry lacks 'response'"
                )
            entries.append(
                FixtureEntry(
                    match_mode=match.get("mode", "sequence"),
                    key=match.get("key"),
                    response=rec["response"],
                    failures_before_success=int(rec.get("failures_before_success", 0)),
                    latency_ms=int(rec.get("latency_ms", 0)),
                )
            )
    return entries


class MockLlmClient(LlmClient):
    """Deterministic replay of scripted responses; thread-safe."""

    def __init__(
        self,
        entries: Sequence[FixtureEntry],
        config: LlmClientConfig = LlmClientConfig(),
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__(config, sleep)
        self._by_id = {e.key: e for e in entries if e.match_mode == "by_id"}
        self._sequence = [e for e in entries if e.match_mode == "sequence"]
        self._cursor = 0
        self._remaining_failures = {id(e): e.failures_before_success for e in entries}
        self._lock = threading.Lock()
        self.attempt_log: list[tuple[str | None, bool]] = []  # (key, delivered)

    @classmethod
    def from_file(cls, path: str, config: LlmClientConfig = LlmClientConfig(), **kw):
        return cls(load_fixture(path), config, **kw)

    @classmethod
    def sequence(cls, responses: Sequence[str], config: LlmClientConfig = LlmClientConfig()):
        return cls([FixtureEntry("sequence", r) for r in responses], config)

    def _attempt(self, messages, request_key):
        with self._lock:
            entry = self._by_id.get(request_key)
            from_sequence = entry is None
            if from_sequence:
                if self._cursor >= len(self._sequence):
                    raise FixtureMiss(
                        f"no fixture entry for request key={request_key!r} "
                        f"(sequence exhausted after {self._cursor} entries)"
                    )
                entry = self._sequence[self._cursor]
            if self._remaining_failures[id(entry)] > 0:
                self._remaining_failures[id(entry)] -= 1
                delivered = None
            else:
                if from_sequence:
                    self._cursor += 1
                delivered = entry.response
            self.attempt_log.append((request_key, delivered is not None))
            latency = entry.latency_ms
        if latency:
            self._sleep(latency / 1000.0)
        if delivered is None:
            raise TransportError(f"injected failure for key={request_key!r}")
        return delivered
