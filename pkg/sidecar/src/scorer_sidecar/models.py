"""Scoring model implementations behind a tiny registry.

The default models are deterministic lexical stand-ins that run anywhere
with no downloads: a hashed character-n-gram embedder, an embedding-cosine
QE proxy, and a chrF-style reference-based scorer. Real neural models plug
in through the same interfaces via registry ids like
"st:sentence-transformers/LaBSE" (requires the real-models extra and a
model download).

All models are pure functions of their inputs, so the service is
deterministic given a fixed configuration.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from typing import Protocol


class Embedder(Protocol):
    name: str
    dim: int

    def embed(self, text: str, lang: str) -> list[float]: ...


class QeModel(Protocol):
    name: str

    def score(self, src: str, hyp: str) -> float: ...


class CometModel(Protocol):
    name: str

    def score(self, src: str, hyp: str, ref: str) -> float: ...


def _char_ngrams(text: str, order: int) -> Counter:
    padded = f" {text.strip()} "
    return Counter(padded[i : i + order] for i in range(max(1, len(padded) - order + 1)))


class HashedNgramEmbedder:
    """Character-trigram counts hashed into a fixed number of buckets and
    L2-normalized. Similar strings land on nearby vectors; the language tag
    is accepted for wire compatibility but the space is shared."""

    def __init__(self, dim: int = 256, order: int = 3, name: str = "lexical-ngram-256"):
        self.dim = dim
        self.order = order
        self.name = name

    def _bucket(self, ngram: str) -> int:
        digest = hashlib.sha256(ngram.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, text: str, lang: str) -> list[float]:
        values = [0.0] * self.dim
        for ngram, count in _char_ngrams(text, self.order).items():
            values[self._bucket(ngram)] += float(count)
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0:
            values[0] = 1.0
            return values
        return [v / norm for v in values]


def _cosine(a: list[float], b: list[float]) -> float:
    num = sum(x * y for x, y in zip(a, b))
    den = math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b))
    return num / den if den else 0.0


class EmbeddingCosineQe:
    """Reference-free proxy: cosine of source and hypothesis embeddings.

    A lexical stand-in for a learned QE model; adequate for pipeline
    plumbing and desk-scale experiments, not for real quality research.
    """

    def __init__(self, embedder: Embedder, name: str = "lexical-qe"):
        self.embedder = embedder
        self.name = name

    def score(self, src: str, hyp: str) -> float:
        return _cosine(self.embedder.embed(src, ""), self.embedder.embed(hyp, ""))


class ChrfStyleComet:
    """Reference-based proxy: character-n-gram F-score of hypothesis against
    reference (orders 1..6, recall-weighted), so an exact match scores the
    maximum 1.0 and degraded hypotheses score strictly less."""

    def __init__(self, max_order: int = 6, beta: float = 2.0, name: str = "lexical-chrf"):
        self.max_order = max_order
        self.beta = beta
        self.name = name

    def score(self, src: str, hyp: str, ref: str) -> float:
        f_scores = []
        for order in range(1, self.max_order + 1):
            hyp_ngrams = _char_ngrams(hyp, order)
            ref_ngrams = _char_ngrams(ref, order)
            overlap = sum((hyp_ngrams & ref_ngrams).values())
            hyp_total = sum(hyp_ngrams.values())
            ref_total = sum(ref_ngrams.values())
            if hyp_total == 0 or ref_total == 0:
                f_scores.append(0.0)
                continue
            precision = overlap / hyp_total
            recall = overlap / ref_total
            if precision + recall == 0.0:
                f_scores.append(0.0)
                continue
            beta_sq = self.beta * self.beta
            f_scores.append(
                (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
            )
        return sum(f_scores) / len(f_scores)


class SentenceTransformerEmbedder:
    """Adapter for sentence-transformers checkpoints (requires a download)."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RuntimeError(
                "sentence-transformers is not installed; "
                "install the 'real-models' extra"
            ) from exc
        self._model = SentenceTransformer(model_id)
        self.name = f"st:{model_id}"
        probe = self._model.encode(["probe"], convert_to_numpy=True)
        self.dim = int(probe.shape[1])

    def embed(self, text: str, lang: str) -> list[float]:
        vector = self._model.encode([text], convert_to_numpy=True, show_progress_bar=False)
        return [float(v) for v in vector[0]]


def build_embedder(spec: str) -> Embedder:
    if spec.startswith("st:"):
        return SentenceTransformerEmbedder(spec[3:])
    if spec == "lexical-ngram-256":
        return HashedNgramEmbedder()
    if spec.startswith("lexical-ngram-"):
        return HashedNgramEmbedder(dim=int(spec.rsplit("-", 1)[1]), name=spec)
    raise ValueError(f"unknown embedder {spec!r}")


def build_qe(spec: str, embedder: Embedder) -> QeModel:
    if spec == "lexical-qe":
        return EmbeddingCosineQe(embedder)
    raise ValueError(f"unknown QE model {spec!r}")


def build_comet(spec: str) -> CometModel:
    if spec == "lexical-chrf":
        return ChrfStyleComet()
    raise ValueError(f"unknown comet model {spec!r}")
