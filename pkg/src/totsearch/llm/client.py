"""One client for every LLM call, with a request journal for offline replay.

Modes:

* ``remote``: OpenAI-compatible ``/chat/completions`` over HTTP.
* ``mock``: a local ``responder(prompt, kind) -> str`` function.
* ``replay``: answers from a journal file; never touches the network.

Remote and mock calls are appended to the journal when one is configured.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

logger = logging.getLogger(__name__)

Responder = Callable[[str, str], str]


class TransportError(RuntimeError):
    pass


class ReplayMissError(KeyError):
    pass


def request_hash(prompt: str, kind: str) -> str:
    return hashlib.sha256(json.dumps([kind, prompt]).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Endpoint:
    base_url: str
    model: str
    token_env: str = "OPENAI_API_KEY"
    path: str = "/chat/completions"
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 1.0
    temperature: float = 0.0


class Journal:
    """Append-only JSONL log of ``{request_hash, kind, model, prompt, response, ts}``."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, kind: str, model: str, prompt: str, response: str, started: float) -> None:
        rec = {"request_hash": request_hash(prompt, kind), "kind": kind, "model": model,
               "prompt": prompt, "response": response,
               "requested_at": started, "responded_at": time.time()}
        line = json.dumps(rec, ensure_ascii=False) + "\n"
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)

    def load(self) -> dict[str, str]:
        table: dict[str, str] = {}
        if not self.path.exists():
            return table
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{self.path}:{lineno}: corrupt journal line") from exc
                table.setdefault(rec["request_hash"], rec["response"])
        return table


class LlmClient:
    def __init__(self, mode: str, endpoint: Endpoint | None = None,
                 responder: Responder | None = None, journal: str | Path | None = None,
                 min_interval: float = 0.0, model: str | None = None):
        if mode not in ("remote", "mock", "replay"):
            raise ValueError(f"unknown LLM client mode {mode!r}")
        if mode == "remote" and endpoint is None:
            raise ValueError("remote mode needs an endpoint")
        if mode == "mock" and responder is None:
            raise ValueError("mock mode needs a responder")
        if mode == "replay" and journal is None:
            raise ValueError("replay mode needs a journal")
        self.mode = mode
        self.endpoint = endpoint
        self.responder = responder
        self.journal = Journal(journal) if journal is not None else None
        self.model = model or (endpoint.model if endpoint else mode)
        self.min_interval = min_interval
        self._replay = self.journal.load() if mode == "replay" else None
        self._rate_lock = threading.Lock()
        self._last_call = 0.0
        self.calls = 0

    @classmethod
    def remote(cls, endpoint: Endpoint, journal=None, min_interval: float = 0.0) -> "LlmClient":
        return cls("remote", endpoint=endpoint, journal=journal, min_interval=min_interval)

    @classmethod
    def mock(cls, responder: Responder, journal=None, model: str = "mock") -> "LlmClient":
        return cls("mock", responder=responder, journal=journal, model=model)

    @classmethod
    def replay(cls, journal) -> "LlmClient":
        return cls("replay", journal=journal)

    def complete(self, prompt: str, kind: str = "generic") -> str:
        if self.mode == "replay":
            key = request_hash(prompt, kind)
            try:
                return self._replay[key]
            except KeyError:
                raise ReplayMissError(f"no journaled response for {kind} request {key[:12]}") from None
        started = time.time()
        if self.mode == "mock":
            response = self.responder(prompt, kind)
        else:
            response = self._post(prompt)
        self.calls += 1
        if self.journal is not None:
            self.journal.append(kind, self.model, prompt, response, started)
        return response

    def _throttle(self) -> None:
        if self.min_interval <= 0:
            return
        with self._rate_lock:
            wait = self._last_call + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()

    def _post(self, prompt: str) -> str:
        ep = self.endpoint
        body = json.dumps({
            "model": ep.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": ep.temperature,
        }).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(ep.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = ep.base_url.rstrip("/") + ep.path
        last: Exception | None = None
        for attempt in range(ep.retries):
            self._throttle()
            try:
                req = urllib.request.Request(url, data=body, headers=headers, method="POST")
                with urllib.request.urlopen(req, timeout=ep.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                return payload["choices"][0]["message"]["content"]
            except urllib.error.HTTPError as exc:
                last = exc
                if exc.code < 500 and exc.code != 429:
                    break
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last = exc
            except (KeyError, IndexError, json.JSONDecodeError) as exc:
                raise TransportError(f"malformed completion payload from {url}") from exc
            if attempt + 1 < ep.retries:
                time.sleep(ep.backoff * 2 ** attempt)
        raise TransportError(f"request to {url} failed after {ep.retries} attempts: {last}")


# -- mock responders --------------------------------------------------------------

_WINDOW_ID = re.compile(r"^\[(\d+)\]", re.MULTILINE)


def window_size_of(prompt: str) -> int:
    """Number of numbered documents in a rerank-window prompt."""
    return len(_WINDOW_ID.findall(prompt))


def identity_responder(prompt: str, kind: str) -> str:
    """Keeps every window as is and retrieves nothing."""
    if kind == "rerank_window":
        return " > ".join(f"[{i}]" for i in range(1, window_size_of(prompt) + 1))
    if kind == "retrieval":
        return "{}"
    if kind == "variant_gen":
        return "[]"
    return "```\n\n```"


def reverse_responder(prompt: str, kind: str) -> str:
    if kind == "rerank_window":
        return " > ".join(f"[{i}]" for i in range(window_size_of(prompt), 0, -1))
    return identity_responder(prompt, kind)
