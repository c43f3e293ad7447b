"""The seven demonstration-example features.

Length features count whitespace tokens for space-segmented languages and
non-whitespace characters for Chinese. The language-model feature is the
length-normalized log likelihood of the completed one-shot block (source
block plus target text). Similarity features are cosines over sentence
embeddings, clamped into [-1, 1] against rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .backend import Backend, Scorer
from .corpus import LangCode, ParallelExample
from .errors import DegradedScorerError, ProtocolError, UndefinedSimilarityError
from .templates import LanguageNameTable, DEFAULT_LANGUAGE_TABLE, PromptTemplate, render_zero_shot

COSINE_CLAMP_EPS = 1e-6

FEATURE_NAMES = (
    "slength",
    "tlength",
    "lm_score",
    "mt_score",
    "sem_score",
    "case_sem_src",
    "case_sem_tgt",
)


@dataclass(frozen=True)
class FeatureVector:
    """Feature values for one demonstration example; a field is None only
    when the scorer is degraded or no test inputs were supplied."""

    slength: int
    tlength: int
    lm_score: float
    mt_score: float | None
    sem_score: float
    case_sem_src: float | None
    case_sem_tgt: float | None

    def __post_init__(self):
        if self.slength < 1 or self.tlength < 1:
            raise ValueError("length features must be >= 1")
        for name in ("sem_score", "case_sem_src", "case_sem_tgt"):
            value = getattr(self, name)
            if value is not None and not -1.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [-1, 1]")

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    def as_row(self, example_id: str) -> list[str]:
        row = [example_id]
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            row.append("NA" if value is None else repr(float(value)))
        return row


def token_count(text: str, lang: LangCode) -> int:
    """Whitespace token count; for Chinese, the non-whitespace character count."""
    if not text.strip():
        raise ValueError("text must be nonempty")
    if lang.code == "zh":
        return sum(1 for ch in text if not ch.isspace())
    return len(text.split())


def completed_block(
    example: ParallelExample,
    template: PromptTemplate,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> str:
    """The demonstration rendered as a finished one-shot block: the zero-shot
    prompt of its source followed by its target text."""
    return render_zero_shot(template, example.pair, example.source_text, table) + example.target_text


def lm_score(example: ParallelExample, template: PromptTemplate, backend: Backend) -> float:
    """Length-normalized log likelihood of the completed one-shot block."""
    result = backend.score_loglikelihood(completed_block(example, template))
    if result.token_count < 1:
        raise ProtocolError("backend reported a non-positive token count")
    return result.total_logprob / result.token_count


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ProtocolError(f"embedding dimensions differ: {len(a)} vs {len(b)}")
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(x * x for x in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise UndefinedSimilarityError("cosine undefined for a zero-norm vector")
    value = sum(x * y for x, y in zip(a, b)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, value))


def sem_score(example: ParallelExample, scorer: Scorer) -> float:
    """Cosine of the example's own source and target embeddings."""
    src_vec = scorer.embed(example.source_text, example.pair.src)
    tgt_vec = scorer.embed(example.target_text, example.pair.tgt)
    return cosine(src_vec.values, tgt_vec.values)


def mt_score(example: ParallelExample, scorer: Scorer) -> float | None:
    """Reference-free quality score of the pair; None when the scorer is degraded."""
    try:
        return scorer.qe_score(example.source_text, example.target_text)
    except DegradedScorerError:
        return None


def case_sem(
    example: ParallelExample,
    test_inputs: Sequence[str],
    side: str,
    scorer: Scorer,
) -> float:
    """Mean cosine between each test input and the example's chosen side.

    Test inputs are assumed to be in the example pair's source language,
    the standard same-pair evaluation setting.
    """
    if side not in ("src", "tgt"):
        raise ValueError(f"side must be 'src' or 'tgt', got {side!r}")
    if not test_inputs:
        raise ValueError("test_inputs must be nonempty")
    if side == "src":
        own = scorer.embed(example.source_text, example.pair.src)
    else:
        own = scorer.embed(example.target_text, example.pair.tgt)
    total = 0.0
    for text in test_inputs:
        total += cosine(scorer.embed(text, example.pair.src).values, own.values)
    return min(1.0, max(-1.0, total / len(test_inputs)))


def compute_all(
    example: ParallelExample,
    test_inputs: Sequence[str] | None,
    template: PromptTemplate,
    backend: Backend,
    scorer: Scorer,
) -> FeatureVector:
    """All seven features; degraded scorers and absent test inputs leave the
    affected fields None instead of failing the pipeline."""
    slength = token_count(example.source_text, example.pair.src)
    tlength = token_count(example.target_text, example.pair.tgt)
    lm = lm_score(example, template, backend)
    sem = sem_score(example, scorer)
    mt = mt_score(example, scorer)
    if test_inputs:
        try:
            css = case_sem(example, test_inputs, "src", scorer)
            cst = case_sem(example, test_inputs, "tgt", scorer)
        except DegradedScorerError:
            css = cst = None
    else:
        css = cst = None
    return FeatureVector(slength, tlength, lm, mt, sem, css, cst)


def write_features_tsv(rows: Iterable[tuple[str, FeatureVector]], path) -> None:
    """Feature dump: id plus the seven feature columns, "NA" for missing."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\t".join(("id",) + FEATURE_NAMES) + "\n")
        for example_id, vector in rows:
            handle.write("\t".join(vector.as_row(example_id)) + "\n")


def read_features_tsv(path) -> dict[str, dict[str, float | None]]:
    """Inverse of write_features_tsv: id -> {feature -> value or None}."""
    out: dict[str, dict[str, float | None]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        if header != ["id", *FEATURE_NAMES]:
            raise ValueError(f"{path}: unexpected feature TSV header {header}")
        for line in handle:
            fields = line.rstrip("\n").split("\t")
            values = {
                name: (None if raw == "NA" else float(raw))
                for name, raw in zip(FEATURE_NAMES, fields[1:])
            }
            out[fields[0]] = values
    return out
