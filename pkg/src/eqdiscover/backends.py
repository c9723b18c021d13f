"""Chat-completion backends: live HTTP, recorded replay, scripted mock.

All backends expose ``complete(prompt) -> ChatExchange`` and are safe to
share across concurrent callers.  ``complete_batch`` fans prompts out with
bounded concurrency and joins responses in request order, so downstream
behavior is order-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import requests

from .errors import ReplayMissError, ScriptExhaustedError, TransportError

MOCK_SEPARATOR = "---"


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode()).hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = "http://localhost:8000/v1"
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.9
    max_retries: int = 3
    timeout: float = 60.0
    api_key_env: str = "EQDISCOVER_API_KEY"
    max_concurrent_requests: int = 4
    retry_backoff: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class ChatExchange:
    prompt: str
    response: str
    latency: float
    backend_id: str
    timestamp: float = field(default_factory=time.time)


class MockBackend:
    """Returns scripted responses in order; raises when the script runs out."""

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        text = Path(path).read_text()
        chunks, current = [], []
        for line in text.splitlines():
            if line.strip() == MOCK_SEPARATOR:
                chunks.append("\n".join(current))
                current = []
            else:
                current.append(line)
        chunks.append("\n".join(current))
        return cls([c for c in chunks if c.strip()])

    @property
    def backend_id(self) -> str:
        return "mock"

    def complete(self, prompt: str) -> ChatExchange:
        with self._lock:
            if self._cursor >= len(self._responses):
                raise ScriptExhaustedError(
                    f"mock script exhausted after {len(self._responses)} responses")
            response = self._responses[self._cursor]
            self._cursor += 1
        return ChatExchange(prompt=prompt, response=response, latency=0.0,
                            backend_id=self.backend_id)


class ReplayBackend:
    """Answers prompts from a recorded transcript, matched by prompt hash.

    Records sharing a hash are replayed first-in-first-out, so construct a
    fresh instance per run to reproduce a run exactly.
    """

    def __init__(self, records: Sequence[dict]):
        self._by_hash: dict = {}
        for record in records:
            self._by_hash.setdefault(record["prompt_sha256"], deque()).append(
                record["response"])
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        records = []
        with open(path) as handle:
            for line in handle:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return cls(records)

    @property
    def backend_id(self) -> str:
        return "replay"

    def complete(self, prompt: str) -> ChatExchange:
        digest = prompt_sha256(prompt)
        with self._lock:
            queue = self._by_hash.get(digest)
            if not queue:
                raise ReplayMissError(
                    f"no recorded exchange for prompt hash {digest[:12]}...")
            response = queue.popleft()
        return ChatExchange(prompt=prompt, response=response, latency=0.0,
                            backend_id=self.backend_id)


class RecordingBackend:
    """Wraps another backend and appends every exchange to a transcript."""

    def __init__(self, inner, path, model: str = "", temperature: float = 0.0):
        self._inner = inner
        self._path = Path(path)
        self._model = model
        self._temperature = temperature
        self._lock = threading.Lock()

    @property
    def backend_id(self) -> str:
        return f"recording({self._inner.backend_id})"

    def complete(self, prompt: str) -> ChatExchange:
        exchange = self._inner.complete(prompt)
        record = {
            "prompt_sha256": prompt_sha256(prompt),
            "response": exchange.response,
            "model": self._model,
            "temperature": self._temperature,
            "timestamp": exchange.timestamp,
        }
        with self._lock, open(self._path, "a") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
        return exchange


class DeadBackend:
    """Always raises TransportError; used to exercise offline fallback."""

    def __init__(self, message: str = "backend unreachable"):
        self._message = message

    @property
    def backend_id(self) -> str:
        return "dead"

    def complete(self, prompt: str) -> ChatExchange:
        raise TransportError(self._message)


class LiveBackend:
    """OpenAI-style chat-completion transport with retry/backoff.

    POSTs ``{endpoint_url}/chat/completions`` with body
    ``{model, temperature, messages=[{role: user, content: prompt}]}`` and a
    bearer token read from the environment variable named in the config.
    Retries connection errors, timeouts, 429 and 5xx responses with
    exponential backoff; other failures raise immediately.
    """

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        self.config = config
        self._session = session or requests.Session()

    @property
    def backend_id(self) -> str:
        return f"live({self.config.model_name})"

    def _headers(self) -> dict:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise TransportError(
                f"API key environment variable {self.config.api_key_env!r} is not set")
        return {"Authorization": f"Bearer {key}",
                "Content-Type": "application/json"}

    def complete(self, prompt: str) -> ChatExchange:
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = self._headers()
        last_error: Optional[str] = None
        last_status: Optional[int] = None
        started = time.time()
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.retry_backoff * 2 ** (attempt - 1))
            try:
                reply = self._session.post(url, json=body, headers=headers,
                                           timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if reply.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {reply.status_code}"
                last_status = reply.status_code
                continue
            if reply.status_code != 200:
                raise TransportError(f"HTTP {reply.status_code}: {reply.text[:200]}",
                                     status=reply.status_code)
            try:
                content = reply.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
            return ChatExchange(prompt=prompt, response=content,
                                latency=time.time() - started,
                                backend_id=self.backend_id)
        raise TransportError(
            f"gave up after {self.config.max_retries + 1} attempts: {last_error}",
            status=last_status)


def complete_batch(backend, prompts: Sequence[str],
                   max_concurrent: int = 4) -> list:
    """Issue several completions with bounded concurrency; the returned
    exchanges are in request order regardless of completion order."""
    from concurrent.futures import ThreadPoolExecutor

    if not prompts:
        return []
    if max_concurrent <= 1 or len(prompts) == 1:
        return [backend.complete(p) for p in prompts]
    with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
        return list(pool.map(backend.complete, prompts))
