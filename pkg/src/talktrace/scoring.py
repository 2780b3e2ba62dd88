"""Conditional log-likelihood scorers.

The attribution pipeline only ever asks one question: the total natural-log
likelihood of a continuation given a context. Three implementations answer it:

* :class:`LexicalScorer` -- a deterministic add-one-smoothed unigram scorer,
  the hermetic stand-in for a neural model.
* :class:`RemoteScorer` -- an adapter over an OpenAI-compatible
  ``/v1/completions`` endpoint with echoed token logprobs.
* :class:`CachingScorer` -- a read-through cache over either backend,
  optionally persisted as append-only JSONL. Drop/Hold/leave-one-out scoring
  re-uses heavily overlapping contexts, so caching is what keeps an n-sentence
  turn at 2n+1 backend calls.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .errors import ScorerBackendError, ScorerProtocolError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


def lexical_score(context: str, continuation: str) -> float:
    """Add-one-smoothed unigram log-likelihood of the continuation under the context.

    With N = number of context tokens (with multiplicity) and V = size of the
    union vocabulary of context and continuation, each continuation token t
    contributes ln((count_context(t) + 1) / (N + V)). The union vocabulary
    makes empty and tiny contexts well-defined, and the total is always <= 0.
    """
    context_tokens = tokenize(context)
    continuation_tokens = tokenize(continuation)
    if not continuation_tokens:
        raise ValueError("continuation tokenizes to nothing; cannot score")
    counts = Counter(context_tokens)
    n = len(context_tokens)
    v = len(set(context_tokens) | set(continuation_tokens))
    return sum(math.log((counts[t] + 1) / (n + v)) for t in continuation_tokens)


@dataclass(frozen=True, slots=True)
class ScoreRequest:
    context: str
    continuation: str

    def __post_init__(self) -> None:
        if not self.context:
            raise ValueError("context must be non-empty (use the continuation cue)")
        if not self.continuation:
            raise ValueError("continuation must be non-empty")

    def cache_key(self) -> tuple[str, str]:
        ck = hashlib.sha256(self.context.encode("utf-8")).hexdigest()
        yk = hashlib.sha256(self.continuation.encode("utf-8")).hexdigest()
        return (ck, yk)


class Scorer(Protocol):
    def logprob(self, context: str, continuation: str) -> float:
        """Total log P(continuation | context) in nats, no length normalization."""
        ...


@dataclass
class ScorerStats:
    calls: int = 0       # logprob invocations observed
    hits: int = 0        # served from cache
    misses: int = 0      # forwarded to the backend (= distinct requests seen)
    retries: int = 0     # remote transport retries


class LexicalScorer:
    """Pure-function scorer; safe to share across threads."""

    def __init__(self) -> None:
        self.stats = ScorerStats()
        self._lock = threading.Lock()

    def logprob(self, context: str, continuation: str) -> float:
        with self._lock:
            self.stats.calls += 1
        return lexical_score(context, continuation)


class ScoreCache:
    """Append-only persistent score cache, one JSONL line per entry.

    Lines are ``{"ck": <context sha256>, "yk": <continuation sha256>,
    "lp": <logprob>}``. Values are deterministic for a fixed backend, so
    concurrent last-write-wins races on identical keys are benign; a torn
    trailing line from an interrupted writer is skipped on load.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            with self._path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        self._entries[(record["ck"], record["yk"])] = float(record["lp"])
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                        continue

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: tuple[str, str]) -> float | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: tuple[str, str], value: float) -> None:
        with self._lock:
            self._entries[key] = value
            if self._path is not None:
                record = {"ck": key[0], "yk": key[1], "lp": value}
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")


class CachingScorer:
    """Read-through cache over a backend scorer.

    ``stats.misses`` counts distinct requests forwarded to the backend, which
    is the telemetry the scorer-call-budget checks rely on.
    """

    def __init__(self, backend: Scorer, cache: ScoreCache | None = None):
        self.backend = backend
        self.cache = cache if cache is not None else ScoreCache()
        self.stats = ScorerStats()
        self._lock = threading.Lock()

    def logprob(self, context: str, continuation: str) -> float:
        key = ScoreRequest(context, continuation).cache_key()
        with self._lock:
            self.stats.calls += 1
        cached = self.cache.get(key)
        if cached is not None:
            with self._lock:
                self.stats.hits += 1
            return cached
        value = self.backend.logprob(context, continuation)
        with self._lock:
            self.stats.misses += 1
        self.cache.put(key, value)
        return value


@dataclass(frozen=True, slots=True)
class ScorerBackendConfig:
    kind: str = "lexical"  # "lexical" | "remote"
    endpoint_url: str = ""
    model_name: str = ""
    timeout_ms: int = 30000
    max_retries: int = 2
    backoff_s: float = 0.25
    max_inflight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("lexical", "remote"):
            raise ValueError(f"unknown scorer kind: {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint_url and self.model_name):
            raise ValueError("remote scorer requires endpoint_url and model_name")

    @classmethod
    def from_dict(cls, payload: dict) -> "ScorerBackendConfig":
        return cls(**payload)


class RemoteScorer:
    """Scorer over an OpenAI-compatible completions endpoint.

    Sends ``prompt = context + continuation`` with ``max_tokens=0``,
    ``echo=true`` and ``logprobs=0``, then locates the continuation's token
    logprobs by character-offset alignment of the echoed tokens against the
    context/continuation boundary. A token straddling the boundary, or echoed
    continuation text that differs from what was requested, is a protocol
    error -- never a silent truncation.
    """

    def __init__(self, config: ScorerBackendConfig, transport: httpx.BaseTransport | None = None):
        if config.kind != "remote":
            raise ValueError("RemoteScorer requires a remote ScorerBackendConfig")
        self.config = config
        self.stats = ScorerStats()
        self._inflight = threading.Semaphore(config.max_inflight)
        self._lock = threading.Lock()
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout_ms / 1000.0,
        )

    def close(self) -> None:
        self._client.close()

    def logprob(self, context: str, continuation: str) -> float:
        request = ScoreRequest(context, continuation)
        with self._lock:
            self.stats.calls += 1
        body = {
            "model": self.config.model_name,
            "prompt": request.context + request.continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }
        url = self.config.endpoint_url.rstrip("/") + "/v1/completions"
        response = self._post_with_retries(url, body)
        return self._extract_continuation_logprob(response, request)

    def _post_with_retries(self, url: str, body: dict) -> dict:
        last_error: Exception | None = None
        last_status: int | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                with self._lock:
                    self.stats.retries += 1
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                with self._inflight:
                    response = self._client.post(url, json=body)
            except httpx.TransportError as exc:
                last_error, last_status = exc, None
                continue
            if response.status_code // 100 == 2:
                try:
                    return response.json()
                except json.JSONDecodeError as exc:
                    raise ScorerProtocolError(f"non-JSON completion response: {exc}") from exc
            last_error, last_status = None, response.status_code
            if response.status_code // 100 != 5:
                break  # 4xx will not get better on retry
        detail = f"status {last_status}" if last_status is not None else f"{last_error}"
        raise ScorerBackendError(f"completions request failed: {detail}", status=last_status)

    @staticmethod
    def _extract_continuation_logprob(payload: dict, request: ScoreRequest) -> float:
        try:
            logprobs = payload["choices"][0]["logprobs"]
            tokens = logprobs["tokens"]
            token_logprobs = logprobs["token_logprobs"]
            offsets = logprobs["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ScorerProtocolError(f"completion response missing logprob fields: {exc}") from exc
        boundary = len(request.context)
        split = None
        for i, offset in enumerate(offsets):
            if offset >= boundary:
                split = i
                break
        if split is None or offsets[split] != boundary:
            raise ScorerProtocolError(
                f"no echoed token starts at the context/continuation boundary "
                f"(offset {boundary}); refusing to truncate"
            )
        echoed = "".join(tokens[split:])
        if echoed != request.continuation:
            raise ScorerProtocolError(
                f"echoed continuation {echoed!r} differs from requested "
                f"{request.continuation!r}"
            )
        tail = token_logprobs[split:]
        if any(not isinstance(lp, (int, float)) for lp in tail):
            raise ScorerProtocolError("continuation token logprobs contain nulls")
        return float(sum(tail))


def build_scorer(
    config: ScorerBackendConfig,
    cache_path: str | Path | None = None,
    transport: httpx.BaseTransport | None = None,
) -> CachingScorer:
    """Construct the configured backend wrapped in a (optionally persistent) cache."""
    backend: Scorer
    if config.kind == "lexical":
        backend = LexicalScorer()
    else:
        backend = RemoteScorer(config, transport=transport)
    return CachingScorer(backend, ScoreCache(cache_path))
