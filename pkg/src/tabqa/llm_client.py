"""Uniform interface to an external instruction-following model.

Two backends share one contract: a Live client speaking an OpenAI-compatible
chat-completions endpoint, and a Replay client backed by a recorded transcript
for deterministic, model-free tests.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import requests

log = logging.getLogger(__name__)


class RoleTag(str, Enum):
    COLUMN_SELECT = "ColumnSelect"
    CODE_GEN = "CodeGen"
    CODE_FIX = "CodeFix"


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    role_tag: RoleTag
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of range [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass
class ChatResponse:
    text: str
    latency_ms: int = 0
    backend: str = "Replay"  # "Live" | "Replay"


class ReplayMiss(Exception):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"transcript has no entry for key {key}")


class EndpointUnreachable(Exception):
    pass


class ResponseTruncated(Exception):
    pass


class UnwritableFile(Exception):
    pass


def transcript_key(role_tag: RoleTag, user_text: str) -> str:
    """Stable 256-bit key over role + exact user text bytes. The system text is
    deliberately excluded so prompt-header wording can evolve without
    invalidating fixtures."""
    h = hashlib.sha256()
    h.update(role_tag.value.encode("utf-8"))
    h.update(b"\n")
    h.update(user_text.encode("utf-8"))
    return h.hexdigest()


class ReplayClient:
    """Deterministic lookup of recorded responses; lock-free reads."""

    def __init__(self, responses: Mapping[str, str]):
        self._responses = dict(responses)

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = transcript_key(req.role_tag, req.user_text)
        try:
            text = self._responses[key]
        except KeyError:
            raise ReplayMiss(key) from None
        return ChatResponse(text=text, latency_ms=0, backend="Replay")


class LiveClient:
    """OpenAI-compatible chat-completions client with bounded retries.

    Retries cover transport-level failures only; a well-formed model reply is
    never retried. Concurrent complete() calls are capped by a semaphore.
    """

    def __init__(
        self,
        endpoint_url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout_s: float = 120.0,
        max_retries: int = 3,
        backoff_s: Sequence[float] = (1.0, 2.0, 4.0),
        max_in_flight: int = 4,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint_url = endpoint_url
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("TABQA_API_KEY", "")
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_s = list(backoff_s)
        self._gate = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()

    def complete(self, req: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_exc: Optional[Exception] = None
        with self._gate:
            for attempt in range(self.max_retries):
                start = time.monotonic()
                try:
                    resp = self._session.post(
                        self.endpoint_url, json=payload, headers=headers, timeout=self.timeout_s
                    )
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_exc = exc
                    if attempt + 1 < self.max_retries:
                        time.sleep(self.backoff_s[min(attempt, len(self.backoff_s) - 1)])
                    continue
                latency_ms = int((time.monotonic() - start) * 1000)
                if resp.status_code >= 500:
                    last_exc = EndpointUnreachable(f"HTTP {resp.status_code}")
                    if attempt + 1 < self.max_retries:
                        time.sleep(self.backoff_s[min(attempt, len(self.backoff_s) - 1)])
                    continue
                if resp.status_code != 200:
                    raise EndpointUnreachable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                body = resp.json()
                choice = body["choices"][0]
                if choice.get("finish_reason") == "length":
                    raise ResponseTruncated(
                        f"output cut off at {req.max_output_tokens} tokens"
                    )
                text = choice.get("message", {}).get("content") or ""
                return ChatResponse(text=text, latency_ms=latency_ms, backend="Live")
        raise EndpointUnreachable(str(last_exc))


def record_transcript(pairs: Iterable[Tuple[ChatRequest, str]], path) -> None:
    """Persist a replayable transcript (one JSON record per line). Duplicate
    keys keep the last text, with a warning."""
    records: dict = {}
    for req, text in pairs:
        key = transcript_key(req.role_tag, req.user_text)
        if key in records and records[key][1] != text:
            log.warning("duplicate transcript key %s; last write wins", key)
        records[key] = (req.role_tag.value, text)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for key, (role, text) in records.items():
                fh.write(json.dumps({"key": key, "role": role, "text": text}, ensure_ascii=False))
                fh.write("\n")
    except OSError as exc:
        raise UnwritableFile(str(exc)) from exc


def load_transcript(path) -> ReplayClient:
    responses: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            responses[rec["key"]] = rec["text"]
    return ReplayClient(responses)
