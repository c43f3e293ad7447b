"""Demonstration selection: random, feature-top-k with length filters,
ordered k-shot assembly, and the staged low-quality-pool strategy.

All functions are pure over immutable inputs; randomness is seeded and keyed
on example ids so that pool order never changes a selection.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .corpus import ExamplePool, LanguagePair, ParallelExample
from .errors import SelectionError
from .features import token_count
from .templates import Demonstration


class Ordering(str, Enum):
    ASCENDING_SCORE = "ascending_score"
    POOL_ORDER = "pool_order"


@dataclass(frozen=True)
class SelectionParams:
    k: int
    min_tokens: int = 10
    max_tokens: int = 100
    seed: int = 0
    ordering: Ordering = Ordering.POOL_ORDER

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.min_tokens >= self.max_tokens:
            raise ValueError("min_tokens must be smaller than max_tokens")
        object.__setattr__(self, "ordering", Ordering(self.ordering))


@dataclass(frozen=True)
class CombinedParams:
    """Stage sizes of the staged strategy: keep the semantic top, drop its
    uninformative head, re-rank by language-model score, then rank by target
    length."""

    sem_keep: int = 11000
    sem_drop: int = 1000
    lm_keep: int = 1000

    def __post_init__(self):
        if not 0 <= self.sem_drop < self.sem_keep:
            raise ValueError("require 0 <= sem_drop < sem_keep")
        if not 1 <= self.lm_keep <= self.sem_keep - self.sem_drop:
            raise ValueError("require 1 <= lm_keep <= sem_keep - sem_drop")


def passes_length_filter(example: ParallelExample, params: SelectionParams) -> bool:
    """Both sides must fall inside [min_tokens, max_tokens]."""
    s = token_count(example.source_text, example.pair.src)
    t = token_count(example.target_text, example.pair.tgt)
    return params.min_tokens <= s <= params.max_tokens and params.min_tokens <= t <= params.max_tokens


def _survivors(pool: ExamplePool, params: SelectionParams) -> list[ParallelExample]:
    return [ex for ex in pool if passes_length_filter(ex, params)]


def select_random(pool: ExamplePool, params: SelectionParams) -> Demonstration:
    """k distinct length-filtered examples, sampled without replacement.

    Deterministic under the seed: a Mersenne Twister samples from the
    id-sorted survivor list, so a permuted pool yields the same choice.
    """
    survivors = _survivors(pool, params)
    if len(survivors) < params.k:
        raise SelectionError(
            f"need k={params.k} examples but only {len(survivors)} survive the length filter"
        )
    rng = random.Random(params.seed)
    chosen = rng.sample(sorted(survivors, key=lambda ex: ex.id), params.k)
    return Demonstration(tuple(chosen), pool.pair)


def _ranked_desc(
    examples: Sequence[ParallelExample], values: Mapping[str, float]
) -> list[ParallelExample]:
    return sorted(examples, key=lambda ex: (-values[ex.id], ex.id))


def select_topk_by_feature(
    pool: ExamplePool, feature_values: Mapping[str, float], params: SelectionParams
) -> Demonstration:
    """The k highest-valued surviving examples, ties broken by ascending id,
    assembled per params.ordering (ascending_score puts the best example
    last, adjacent to the test input)."""
    survivors = _survivors(pool, params)
    missing = [ex.id for ex in survivors if ex.id not in feature_values]
    if missing:
        raise SelectionError(f"missing feature values for ids: {missing[:5]}")
    if len(survivors) < params.k:
        raise SelectionError(
            f"need k={params.k} examples but only {len(survivors)} survive the length filter"
        )
    top = _ranked_desc(survivors, feature_values)[: params.k]
    scores = [feature_values[ex.id] for ex in top]
    return order_demonstration(top, scores, params.ordering, pool_order=list(pool))


def order_demonstration(
    examples: Sequence[ParallelExample],
    scores: Sequence[float],
    ordering: Ordering | str,
    pool_order: Sequence[ParallelExample] | None = None,
) -> Demonstration:
    """Assemble a demonstration: ascending_score sorts by score ascending
    (stable by id), pool_order keeps the given pool's order (or the input
    order when no pool is supplied)."""
    ordering = Ordering(ordering)
    if len(examples) != len(scores):
        raise ValueError(f"{len(examples)} examples but {len(scores)} scores")
    if not examples:
        raise ValueError("cannot order an empty demonstration")
    pair = examples[0].pair
    if ordering is Ordering.ASCENDING_SCORE:
        paired = sorted(zip(examples, scores), key=lambda item: (item[1], item[0].id))
        ordered = [ex for ex, _ in paired]
    else:
        if pool_order is not None:
            selected = {ex.id for ex in examples}
            ordered = [ex for ex in pool_order if ex.id in selected]
        else:
            ordered = list(examples)
    return Demonstration(tuple(ordered), pair)


def combined_stage_sizes(params: CombinedParams, pool_size: int) -> tuple[int, int, int]:
    """Stage sizes for a pool of `pool_size` examples.

    Keep counts clamp to what remains; the drop count scales down with the
    achieved semantic keep (floor), so it equals the configured drop on
    full-size pools and reaches zero on tiny ones, never emptying a stage.
    """
    n1 = min(params.sem_keep, pool_size)
    drop = (params.sem_drop * n1) // params.sem_keep
    n2 = n1 - drop
    m = min(params.lm_keep, n2)
    return n1, drop, m


def select_combined(
    pool: ExamplePool,
    sem_values: Mapping[str, float],
    lm_values: Mapping[str, float],
    tlen_values: Mapping[str, float],
    k: int,
    params: CombinedParams = CombinedParams(),
) -> Demonstration:
    """The staged low-quality-pool strategy: semantic top cut, uninformative
    head dropped, language-model re-rank, final k by descending target
    length (ascending id on ties). Output order is the final ranking."""
    if len(pool) == 0:
        raise SelectionError("pool is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    for name, values in (("sem", sem_values), ("lm", lm_values), ("tlen", tlen_values)):
        missing = [ex.id for ex in pool if ex.id not in values]
        if missing:
            raise SelectionError(f"missing {name} values for ids: {missing[:5]}")
    n1, drop, m = combined_stage_sizes(params, len(pool))
    stage1 = _ranked_desc(list(pool), sem_values)[:n1]
    stage2 = stage1[drop:]
    stage3 = _ranked_desc(stage2, lm_values)[:m]
    stage4 = _ranked_desc(stage3, tlen_values)
    if k > len(stage4):
        raise SelectionError(f"k={k} exceeds the final stage size {len(stage4)}")
    return Demonstration(tuple(stage4[:k]), pool.pair)


def demonstration_to_jsonl(demo: Demonstration, path) -> None:
    """Serialize a demonstration for reuse and audit: one example per line."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for ex in demo.examples:
            handle.write(
                json.dumps(
                    {"id": ex.id, "src": ex.source_text, "tgt": ex.target_text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_demonstration_jsonl(path, pair: LanguagePair) -> Demonstration:
    examples = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line in handle:
            record = json.loads(line)
            examples.append(ParallelExample(record["id"], record["src"], record["tgt"], pair))
    return Demonstration(tuple(examples), pair)


def demonstration_digest(demo: Demonstration) -> str:
    """Stable hash over the serialized demonstration, recorded in report rows."""
    canonical = json.dumps(
        [
            {"id": ex.id, "src": ex.source_text, "tgt": ex.target_text}
            for ex in demo.examples
        ],
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
