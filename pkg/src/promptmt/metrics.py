"""Surface metrics (corpus BLEU, document-level BLEU), model-metric batching
and rank-correlation statistics.

The BLEU computation follows the standard recipe: per-segment clipped
n-gram counts up to order 4, geometric mean of precisions times the brevity
penalty, scaled to [0, 100], with no smoothing. Tokenization is a
13a-style rule set for Latin scripts and character splitting for Chinese,
both written to match the canonical SacreBLEU outputs on fixture corpora.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from scipy import stats as scipy_stats

from .backend import Scorer
from .errors import DegradedScorerError, UndefinedCorrelationError

log = logging.getLogger(__name__)


class BleuTokenizer(str, Enum):
    INTL_13A_STYLE = "13a"
    ZH_CHARACTER = "zh"


@dataclass(frozen=True)
class BleuConfig:
    tokenizer: BleuTokenizer = BleuTokenizer.INTL_13A_STYLE
    max_ngram: int = 4
    smoothing: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "tokenizer", BleuTokenizer(self.tokenizer))
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")
        if self.smoothing != "none":
            raise ValueError(f"unsupported smoothing {self.smoothing!r}")

    @property
    def signature(self) -> str:
        return f"bleu|tok:{self.tokenizer.value}|n:{self.max_ngram}|smooth:{self.smoothing}"


def _tokenize_13a(line: str) -> str:
    """Minimal mteval-v13a-equivalent tokenization for Western languages."""
    norm = line
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    norm = re.sub(r"\s+", " ", norm)
    return norm.strip()


# Codepoint ranges treated as Chinese characters to split apart, mirroring
# the ranges the canonical scorer uses (CJK ideographs and compatibility
# blocks, CJK punctuation, fullwidth forms, radicals, strokes, phonetics).
_ZH_CHAR_RANGES = (
    (0x3400, 0x4DB5),
    (0x4E00, 0x9FA5),
    (0x9FA6, 0x9FBB),
    (0xF900, 0xFA2D),
    (0xFA30, 0xFA6A),
    (0xFA70, 0xFAD9),
    (0x20000, 0x2A6D6),
    (0x2F800, 0x2FA1D),
    (0xFF00, 0xFFEF),
    (0x2E80, 0x2EFF),
    (0x3000, 0x303F),
    (0x31C0, 0x31EF),
    (0x2F00, 0x2FDF),
    (0x2FF0, 0x2FFF),
    (0x3100, 0x312F),
    (0x31A0, 0x31BF),
    (0xFE10, 0xFE1F),
    (0xFE30, 0xFE4F),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0x3200, 0x32FF),
    (0x3300, 0x33FF),
)


def _is_chinese_char(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _ZH_CHAR_RANGES)


def _tokenize_zh(line: str) -> str:
    """Split Chinese characters apart, then apply the punctuation rules to
    the remaining (non-CJK) text."""
    line = line.strip()
    parts = []
    for ch in line:
        if _is_chinese_char(ch):
            parts.append(f" {ch} ")
        else:
            parts.append(ch)
    norm = "".join(parts)
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    norm = re.sub(r"\s+", " ", norm)
    return norm.strip()


_TOKENIZE = {
    BleuTokenizer.INTL_13A_STYLE: _tokenize_13a,
    BleuTokenizer.ZH_CHARACTER: _tokenize_zh,
}


def _ngram_counts(tokens: Sequence[str], max_ngram: int) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_ngram + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return counts


def corpus_bleu(hyps: Sequence[str], refs: Sequence[str], cfg: BleuConfig = BleuConfig()) -> float:
    """Corpus BLEU in [0, 100] against one reference per hypothesis."""
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise ValueError("corpus must be nonempty")
    tokenize = _TOKENIZE[cfg.tokenizer]
    correct = [0] * cfg.max_ngram
    total = [0] * cfg.max_ngram
    sys_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_tokens = tokenize(hyp.rstrip()).split()
        ref_tokens = tokenize(ref.rstrip()).split()
        sys_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        ref_counts = _ngram_counts(ref_tokens, cfg.max_ngram)
        for ngram, count in _ngram_counts(hyp_tokens, cfg.max_ngram).items():
            order = len(ngram)
            correct[order - 1] += min(count, ref_counts.get(ngram, 0))
            total[order - 1] += count
    log_precision_sum = 0.0
    for n in range(cfg.max_ngram):
        if total[n] == 0 or correct[n] == 0:
            return 0.0
        log_precision_sum += math.log(correct[n] / total[n])
    if sys_len == 0:
        return 0.0
    brevity_penalty = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    return 100.0 * brevity_penalty * math.exp(log_precision_sum / cfg.max_ngram)


def doc_bleu(
    docs: Sequence[tuple[Sequence[str], Sequence[str]]], cfg: BleuConfig = BleuConfig()
) -> float:
    """Document-level BLEU: each document's sentences are concatenated (with
    single spaces, or no separator for Chinese) and the documents are scored
    as one corpus."""
    joiner = "" if cfg.tokenizer is BleuTokenizer.ZH_CHARACTER else " "
    hyps, refs = [], []
    for idx, (hyp_sents, ref_sents) in enumerate(docs):
        if len(hyp_sents) != len(ref_sents):
            raise ValueError(
                f"document {idx}: {len(hyp_sents)} hypothesis sentences "
                f"but {len(ref_sents)} references"
            )
        hyps.append(joiner.join(hyp_sents))
        refs.append(joiner.join(ref_sents))
    return corpus_bleu(hyps, refs, cfg)


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value={self.p_value} outside [0, 1]")


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for idx in order[i : j + 1]:
            ranks[idx] = mean_rank
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    var_x = sum(v * v for v in dx)
    var_y = sum(v * v for v in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise UndefinedCorrelationError("zero rank variance in one variable")
    return sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman's rho: Pearson correlation of average-ranked data, with a
    two-sided p-value from the t-distribution approximation."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 observations")
    rho = _pearson(average_ranks(x), average_ranks(y))
    rho = min(1.0, max(-1.0, rho))
    if abs(rho) == 1.0:
        p_value = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p_value = float(2.0 * scipy_stats.t.sf(abs(t), n - 2))
    return CorrelationResult(rho, min(1.0, p_value), n)


@dataclass(frozen=True)
class CometBatch:
    mean: float
    segment_scores: tuple[float, ...]


def comet_batch(
    srcs: Sequence[str],
    hyps: Sequence[str],
    refs: Sequence[str],
    scorer: Scorer,
) -> CometBatch | None:
    """Mean of per-segment scorer values plus the segments themselves;
    None (with a logged warning) when the scorer is degraded, so runs
    continue BLEU-only. Empty hypotheses score the scorer's floor of 0.0
    without a scorer round trip."""
    if not (len(srcs) == len(hyps) == len(refs)):
        raise ValueError("srcs, hyps and refs must be aligned")
    if not srcs:
        raise ValueError("batch must be nonempty")
    segment_scores = []
    for src, hyp, ref in zip(srcs, hyps, refs):
        if not hyp.strip():
            segment_scores.append(0.0)
            continue
        try:
            segment_scores.append(float(scorer.comet_score(src, hyp, ref)))
        except DegradedScorerError as exc:
            log.warning("comet scorer degraded (%s); reporting BLEU only", exc)
            return None
    return CometBatch(sum(segment_scores) / len(segment_scores), tuple(segment_scores))
