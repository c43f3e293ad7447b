"""Uniform access to generation, log-likelihood scoring, sentence embedding
and quality scoring.

Three families of implementations share two small protocols:

* HTTP clients for a real LLM endpoint and for the scorer sidecar,
* strict table-driven mocks (plus rule-driven mocks for constructed worlds),
* a persistent content-addressed response cache that wraps either and is
  semantically transparent.

Every generation result carries tokens_generated and wall_time_s so callers
can derive per-token latency.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import requests

from .corpus import LangCode
from .errors import (
    ContextOverflowError,
    DegradedScorerError,
    MockMissError,
    ProtocolError,
    TransportError,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "PROMPTMT_API_KEY"
CACHE_DIR_ENV = "PROMPTMT_CACHE"

DEFAULT_BEAM_SIZE = 2
DEFAULT_MAX_NEW_TOKENS = 256


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    beam_size: int = DEFAULT_BEAM_SIZE
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))

    def payload(self) -> dict:
        return {
            "prompt": self.prompt,
            "beam_size": self.beam_size,
            "max_new_tokens": self.max_new_tokens,
            "stop": list(self.stop_sequences),
        }


@dataclass(frozen=True)
class GenerationResult:
    """Continuation with the stop sequence and anything after it stripped.

    An empty text is the well-formed "backend refused/emitted nothing"
    signal, never an exception; callers decide how to treat it.
    """

    text: str
    tokens_generated: int
    wall_time_s: float

    def __post_init__(self):
        if self.text and self.tokens_generated < 1:
            raise ValueError("tokens_generated must be >= 1 for nonempty text")
        if self.tokens_generated < 0 or self.wall_time_s < 0:
            raise ValueError("tokens_generated and wall_time_s must be >= 0")

    @property
    def seconds_per_token(self) -> float:
        if self.tokens_generated == 0:
            return 0.0
        return self.wall_time_s / self.tokens_generated


@dataclass(frozen=True)
class ScoreResult:
    total_logprob: float
    token_count: int

    def __post_init__(self):
        if self.token_count < 1:
            raise ValueError("token_count must be >= 1")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding must be non-empty")

    @property
    def dim(self) -> int:
        return len(self.values)


def truncate_at_stop(text: str, stop_sequences: tuple[str, ...] | list[str]) -> str:
    """Cut the continuation at the earliest stop-sequence occurrence."""
    cut = len(text)
    for stop in stop_sequences:
        if not stop:
            continue
        pos = text.find(stop)
        if pos != -1:
            cut = min(cut, pos)
    return text[:cut]


class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResult: ...

    def score_loglikelihood(self, text: str) -> ScoreResult: ...


class Scorer(Protocol):
    def embed(self, text: str, lang: LangCode) -> EmbeddingVector: ...

    def qe_score(self, src: str, hyp: str) -> float: ...

    def comet_score(self, src: str, hyp: str, ref: str) -> float: ...


class CallCounter:
    """Thread-safe per-operation call counts, used by cache-transparency tests."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}

    def bump(self, op: str) -> None:
        with self._lock:
            self._counts[op] = self._counts.get(op, 0) + 1

    def get(self, op: str) -> int:
        with self._lock:
            return self._counts.get(op, 0)

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())


def _word_tokens(text: str) -> int:
    return max(1, len(text.split())) if text else 0


class MockBackend:
    """Table-driven backend; in strict mode unknown inputs raise, never fabricate."""

    def __init__(
        self,
        generation: Mapping[str, str] | None = None,
        scores: Mapping[str, tuple[float, int]] | None = None,
        strict: bool = True,
    ):
        self.generation = dict(generation or {})
        self.scores = dict(scores or {})
        self.strict = strict
        self.calls = CallCounter()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.calls.bump("generate")
        if request.prompt not in self.generation:
            if self.strict:
                raise MockMissError(f"no canned continuation for prompt {request.prompt!r}")
            return GenerationResult("", 0, 0.0)
        text = truncate_at_stop(self.generation[request.prompt], request.stop_sequences)
        return GenerationResult(text, _word_tokens(text), 0.0)

    def score_loglikelihood(self, text: str) -> ScoreResult:
        if not text:
            raise ValueError("text to score must be nonempty")
        self.calls.bump("score")
        if text not in self.scores:
            if self.strict:
                raise MockMissError(f"no canned score for text {text!r}")
            return ScoreResult(0.0, max(1, len(text.split())))
        logprob, tokens = self.scores[text]
        return ScoreResult(logprob, tokens)


class RuleBackend:
    """Rule-driven backend for constructed test worlds (echo worlds, monotone
    quality worlds). Generation output still honors the stop contract."""

    def __init__(
        self,
        generate_fn: Callable[[str], str],
        score_fn: Callable[[str], tuple[float, int]] | None = None,
    ):
        self._generate_fn = generate_fn
        self._score_fn = score_fn
        self.calls = CallCounter()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.calls.bump("generate")
        text = truncate_at_stop(self._generate_fn(request.prompt), request.stop_sequences)
        return GenerationResult(text, _word_tokens(text), 0.0)

    def score_loglikelihood(self, text: str) -> ScoreResult:
        if not text:
            raise ValueError("text to score must be nonempty")
        self.calls.bump("score")
        if self._score_fn is None:
            return ScoreResult(-float(len(text.split())), max(1, len(text.split())))
        logprob, tokens = self._score_fn(text)
        return ScoreResult(logprob, tokens)


def _hash_basis_vector(text: str, dim: int) -> tuple[float, ...]:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    index = int.from_bytes(digest[:8], "big") % dim
    return tuple(1.0 if i == index else 0.0 for i in range(dim))


class MockScorer:
    """Deterministic scorer mock.

    Embeddings come from an explicit table when given, otherwise from a
    stable unit basis vector chosen by the text hash. QE is a constant or a
    callable; COMET defaults to an echo rule that awards `comet_max` when
    the hypothesis equals the reference.
    """

    def __init__(
        self,
        dim: int = 8,
        embeddings: Mapping[str, tuple[float, ...]] | None = None,
        qe: float | Callable[[str, str], float] = 0.5,
        comet: Callable[[str, str, str], float] | None = None,
        comet_max: float = 1.0,
        strict: bool = False,
    ):
        self.dim = dim
        self.embeddings = dict(embeddings or {})
        self._qe = qe
        self._comet = comet
        self.comet_max = comet_max
        self.strict = strict
        self.calls = CallCounter()

    def embed(self, text: str, lang: LangCode) -> EmbeddingVector:
        if not text:
            raise ValueError("text to embed must be nonempty")
        self.calls.bump("embed")
        if text in self.embeddings:
            return EmbeddingVector(tuple(self.embeddings[text]))
        if self.strict:
            raise MockMissError(f"no canned embedding for text {text!r}")
        return EmbeddingVector(_hash_basis_vector(text, self.dim))

    def qe_score(self, src: str, hyp: str) -> float:
        if not src or not hyp:
            raise ValueError("qe_score requires nonempty texts")
        self.calls.bump("qe")
        return self._qe(src, hyp) if callable(self._qe) else float(self._qe)

    def comet_score(self, src: str, hyp: str, ref: str) -> float:
        if not src or not hyp or not ref:
            raise ValueError("comet_score requires nonempty texts")
        self.calls.bump("comet")
        if self._comet is not None:
            return self._comet(src, hyp, ref)
        return self.comet_max if hyp == ref else 0.0


class FailingScorer:
    """Scorer whose every call reports degradation; for missing-feature paths."""

    def embed(self, text: str, lang: LangCode) -> EmbeddingVector:
        raise DegradedScorerError("scorer unavailable")

    def qe_score(self, src: str, hyp: str) -> float:
        raise DegradedScorerError("scorer unavailable")

    def comet_score(self, src: str, hyp: str, ref: str) -> float:
        raise DegradedScorerError("scorer unavailable")


class HttpBackend:
    """JSON-over-HTTP client for the generation/scoring endpoint.

    One URL serves both request shapes: {"prompt", "beam_size",
    "max_new_tokens", "stop"} -> {"text", "tokens"} and {"text_to_score"}
    -> {"logprob", "tokens"}. Transport failures are retried with
    exponential backoff; a well-formed empty completion is data and is
    never retried.
    """

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._session = session or requests.Session()

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        attempts = 0
        delay = self.backoff_s
        while True:
            attempts += 1
            try:
                response = self._session.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout_s
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempts > self.max_retries:
                    raise TransportError(f"backend unreachable: {exc}", attempts)
                time.sleep(delay)
                delay *= 2
                continue
            if response.status_code == 413:
                raise ContextOverflowError(f"backend rejected oversized input: {response.text}")
            if response.status_code >= 500:
                if attempts > self.max_retries:
                    raise TransportError(f"backend error {response.status_code}", attempts)
                time.sleep(delay)
                delay *= 2
                continue
            if response.status_code != 200:
                raise ProtocolError(f"backend returned {response.status_code}: {response.text}")
            try:
                return response.json()
            except ValueError:
                raise ProtocolError(f"backend returned non-JSON body: {response.text[:200]}")

    def generate(self, request: GenerationRequest) -> GenerationResult:
        started = time.monotonic()
        body = self._post(request.payload())
        elapsed = time.monotonic() - started
        if not isinstance(body.get("text"), str) or not isinstance(body.get("tokens"), int):
            raise ProtocolError(f"malformed generation response: {body!r}")
        text = truncate_at_stop(body["text"], request.stop_sequences)
        tokens = body["tokens"] if text else 0
        if text and tokens < 1:
            tokens = _word_tokens(text)
        return GenerationResult(text, tokens, elapsed)

    def score_loglikelihood(self, text: str) -> ScoreResult:
        if not text:
            raise ValueError("text to score must be nonempty")
        body = self._post({"text_to_score": text})
        if "logprob" not in body or "tokens" not in body:
            raise ProtocolError(f"malformed scoring response: {body!r}")
        return ScoreResult(float(body["logprob"]), int(body["tokens"]))


class HttpScorer:
    """Client for the scorer sidecar: POST /embed, /qe, /comet and GET /health.

    Any transport problem surfaces as DegradedScorerError so the pipeline can
    mark dependent features missing instead of fabricating values; a change
    of embedding dimension mid-session is a ProtocolError.
    """

    def __init__(
        self,
        base_url: str,
        timeout_s: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._session = session or requests.Session()
        self._dim: int | None = None
        self._lock = threading.Lock()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._session.post(
                f"{self.base_url}{path}", json=payload, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise DegradedScorerError(f"scorer unreachable at {path}: {exc}")
        if response.status_code != 200:
            raise DegradedScorerError(f"scorer {path} returned {response.status_code}")
        try:
            return response.json()
        except ValueError:
            raise ProtocolError(f"scorer {path} returned non-JSON body")

    def health(self) -> dict:
        try:
            response = self._session.get(f"{self.base_url}/health", timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise DegradedScorerError(f"scorer health check failed: {exc}")
        if response.status_code != 200:
            raise DegradedScorerError(f"scorer health returned {response.status_code}")
        return response.json()

    def _check_dim(self, vector: tuple[float, ...]) -> None:
        with self._lock:
            if self._dim is None:
                self._dim = len(vector)
            elif self._dim != len(vector):
                raise ProtocolError(
                    f"embedding dimension drifted from {self._dim} to {len(vector)}"
                )

    def embed(self, text: str, lang: LangCode) -> EmbeddingVector:
        if not text:
            raise ValueError("text to embed must be nonempty")
        body = self._post("/embed", {"text": text, "lang": lang.code})
        if "vector" not in body or not isinstance(body["vector"], list):
            raise ProtocolError(f"malformed embed response: {body!r}")
        vector = tuple(float(v) for v in body["vector"])
        self._check_dim(vector)
        return EmbeddingVector(vector)

    def qe_score(self, src: str, hyp: str) -> float:
        if not src or not hyp:
            raise ValueError("qe_score requires nonempty texts")
        body = self._post("/qe", {"src": src, "hyp": hyp})
        if "score" not in body:
            raise ProtocolError(f"malformed qe response: {body!r}")
        return float(body["score"])

    def comet_score(self, src: str, hyp: str, ref: str) -> float:
        if not src or not hyp or not ref:
            raise ValueError("comet_score requires nonempty texts")
        body = self._post("/comet", {"src": src, "hyp": hyp, "ref": ref})
        if "score" not in body:
            raise ProtocolError(f"malformed comet response: {body!r}")
        return float(body["score"])


def canonical_payload_digest(kind: str, payload: dict) -> str:
    canonical = json.dumps(
        {"kind": kind, "payload": payload},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response store under a directory.

    Keys are the SHA-256 of the canonical JSON payload (endpoint kind
    included), so any payload change misses. Writes are atomic via
    temp-file + rename, which keeps concurrent readers safe; a corrupt
    entry is invalidated and recomputed with a logged warning.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, kind: str, payload: dict) -> dict | None:
        path = self._path(canonical_payload_digest(kind, payload))
        if not path.exists():
            with self._lock:
                self.misses += 1
            return None
        try:
            with open(path, encoding="utf-8") as handle:
                entry = json.load(handle)
        except (json.JSONDecodeError, OSError) as exc:
            log.warning("cache entry %s corrupt (%s); recomputing", path.name, exc)
            path.unlink(missing_ok=True)
            with self._lock:
                self.misses += 1
            return None
        with self._lock:
            self.hits += 1
        return entry

    def put(self, kind: str, payload: dict, response: dict) -> None:
        path = self._path(canonical_payload_digest(kind, payload))
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}.{threading.get_ident()}")
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(response, handle, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)

    @property
    def stats(self) -> dict:
        with self._lock:
            return {"hits": self.hits, "misses": self.misses}


class CachingBackend:
    """Transparent persistent cache around any Backend."""

    def __init__(self, inner: Backend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache

    def generate(self, request: GenerationRequest) -> GenerationResult:
        payload = request.payload()
        hit = self.cache.get("generate", payload)
        if hit is not None:
            return GenerationResult(hit["text"], hit["tokens_generated"], hit["wall_time_s"])
        result = self.inner.generate(request)
        self.cache.put(
            "generate",
            payload,
            {
                "text": result.text,
                "tokens_generated": result.tokens_generated,
                "wall_time_s": result.wall_time_s,
            },
        )
        return result

    def score_loglikelihood(self, text: str) -> ScoreResult:
        payload = {"text_to_score": text}
        hit = self.cache.get("score", payload)
        if hit is not None:
            return ScoreResult(hit["total_logprob"], hit["token_count"])
        result = self.inner.score_loglikelihood(text)
        self.cache.put(
            "score",
            payload,
            {"total_logprob": result.total_logprob, "token_count": result.token_count},
        )
        return result


class CachingScorer:
    """Transparent persistent cache around any Scorer."""

    def __init__(self, inner: Scorer, cache: ResponseCache):
        self.inner = inner
        self.cache = cache

    def embed(self, text: str, lang: LangCode) -> EmbeddingVector:
        payload = {"text": text, "lang": lang.code}
        hit = self.cache.get("embed", payload)
        if hit is not None:
            return EmbeddingVector(tuple(hit["vector"]))
        vector = self.inner.embed(text, lang)
        self.cache.put("embed", payload, {"vector": list(vector.values)})
        return vector

    def qe_score(self, src: str, hyp: str) -> float:
        payload = {"src": src, "hyp": hyp}
        hit = self.cache.get("qe", payload)
        if hit is not None:
            return hit["score"]
        score = self.inner.qe_score(src, hyp)
        self.cache.put("qe", payload, {"score": score})
        return score

    def comet_score(self, src: str, hyp: str, ref: str) -> float:
        payload = {"src": src, "hyp": hyp, "ref": ref}
        hit = self.cache.get("comet", payload)
        if hit is not None:
            return hit["score"]
        score = self.inner.comet_score(src, hyp, ref)
        self.cache.put("comet", payload, {"score": score})
        return score


def with_cache(client, cache_dir) -> CachingBackend | CachingScorer:
    """Wrap a backend or scorer with a persistent response cache."""
    cache = ResponseCache(cache_dir)
    if hasattr(client, "generate"):
        return CachingBackend(client, cache)
    if hasattr(client, "embed"):
        return CachingScorer(client, cache)
    raise TypeError(f"{type(client).__name__} is neither a backend nor a scorer")
