"""Demonstrations built from monolingual data: random pairing and
pseudo-parallel pairs via zero-shot back-/forward-translation.

Back-translation keeps every real target sentence byte-exact and generates
the source side; forward-translation mirrors the roles. Empty generations
are dropped and replaced by the next sampled sentence so k stays constant.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .backend import Backend, GenerationRequest, DEFAULT_BEAM_SIZE
from .corpus import LanguagePair, MonolingualExample, ParallelExample
from .errors import AugmentationError
from .templates import (
    Demonstration,
    PromptTemplate,
    TEMPLATE_A_EN,
    TemplateId,
    TemplateLanguage,
    render_zero_shot,
    standard_stop_sequences,
)


class Provenance(str, Enum):
    RANDOM_PAIR = "random_pair"
    FORWARD_TRANSLATED = "forward_translated"
    BACK_TRANSLATED = "back_translated"


@dataclass(frozen=True)
class AugmentedExample(ParallelExample):
    """Parallel example carrying how it was constructed; back-translated
    pairs hold a verbatim real target, forward-translated a verbatim real
    source."""

    provenance: Provenance = Provenance.RANDOM_PAIR
    generator_template: PromptTemplate | None = None


def build_random_pairs(
    src_mono: Sequence[MonolingualExample],
    tgt_mono: Sequence[MonolingualExample],
    k: int,
    seed: int,
) -> Demonstration:
    """k pairs formed by independently sampling each side without replacement."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(src_mono) < k or len(tgt_mono) < k:
        raise AugmentationError(
            f"need {k} sentences on both sides, have {len(src_mono)}/{len(tgt_mono)}", 0
        )
    pair = LanguagePair(src_mono[0].lang, tgt_mono[0].lang)
    rng = random.Random(seed)
    srcs = rng.sample(list(src_mono), k)
    tgts = rng.sample(list(tgt_mono), k)
    examples = tuple(
        AugmentedExample(
            id=f"rand:{s.id}+{t.id}",
            source_text=s.text,
            target_text=t.text,
            pair=pair,
            provenance=Provenance.RANDOM_PAIR,
        )
        for s, t in zip(srcs, tgts)
    )
    return Demonstration(examples, pair)


def _translate_zero_shot(
    backend: Backend,
    template: PromptTemplate,
    direction: LanguagePair,
    text: str,
    max_new_tokens: int,
) -> str:
    prompt = render_zero_shot(template, direction, text)
    request = GenerationRequest(
        prompt,
        beam_size=DEFAULT_BEAM_SIZE,
        max_new_tokens=max_new_tokens,
        stop_sequences=standard_stop_sequences(template, direction),
    )
    return backend.generate(request).text


def build_back_translated(
    tgt_mono: Sequence[MonolingualExample],
    pair: LanguagePair,
    template: PromptTemplate = TEMPLATE_A_EN,
    backend: Backend = None,
    k: int = 1,
    seed: int = 0,
    max_new_tokens: int = 256,
) -> Demonstration:
    """Pseudo pairs for test direction `pair`: each sampled target sentence
    keeps its text verbatim, the source side is its zero-shot translation in
    the reverse direction under the generation decoding contract."""
    return _build_translated(
        tgt_mono, pair, template, backend, k, seed, max_new_tokens, Provenance.BACK_TRANSLATED
    )


def build_forward_translated(
    src_mono: Sequence[MonolingualExample],
    pair: LanguagePair,
    template: PromptTemplate = TEMPLATE_A_EN,
    backend: Backend = None,
    k: int = 1,
    seed: int = 0,
    max_new_tokens: int = 256,
) -> Demonstration:
    """Mirror of back-translation: real source kept verbatim, target generated."""
    return _build_translated(
        src_mono, pair, template, backend, k, seed, max_new_tokens, Provenance.FORWARD_TRANSLATED
    )


def _build_translated(
    mono: Sequence[MonolingualExample],
    pair: LanguagePair,
    template: PromptTemplate,
    backend: Backend,
    k: int,
    seed: int,
    max_new_tokens: int,
    provenance: Provenance,
) -> Demonstration:
    if backend is None:
        raise ValueError("a generation backend is required")
    if k < 1:
        raise ValueError("k must be >= 1")
    back = provenance is Provenance.BACK_TRANSLATED
    expected_lang = pair.tgt if back else pair.src
    for m in mono:
        if m.lang != expected_lang:
            raise ValueError(
                f"{provenance.value} over {pair} needs {expected_lang} sentences, "
                f"example {m.id!r} is {m.lang}"
            )
    direction = pair.reversed() if back else pair
    rng = random.Random(seed)
    order = rng.sample(list(mono), len(mono))
    examples: list[AugmentedExample] = []
    dropped = 0
    for sentence in order:
        if len(examples) == k:
            break
        generated = _translate_zero_shot(
            backend, template, direction, sentence.text, max_new_tokens
        )
        if not generated.strip():
            dropped += 1
            continue
        if back:
            source_text, target_text = generated, sentence.text
            example_id = f"bt:{sentence.id}"
        else:
            source_text, target_text = sentence.text, generated
            example_id = f"ft:{sentence.id}"
        examples.append(
            AugmentedExample(
                id=example_id,
                source_text=source_text,
                target_text=target_text,
                pair=pair,
                provenance=provenance,
                generator_template=template,
            )
        )
    if len(examples) < k:
        raise AugmentationError(
            f"monolingual pool exhausted: built {len(examples)} of {k} pairs", dropped
        )
    return Demonstration(tuple(examples), pair)


def augmented_to_jsonl(demo: Demonstration, path) -> None:
    """Serialize augmented demonstrations with their provenance fields."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for ex in demo.examples:
            record = {"id": ex.id, "src": ex.source_text, "tgt": ex.target_text}
            if isinstance(ex, AugmentedExample):
                record["provenance"] = ex.provenance.value
                if ex.generator_template is not None:
                    record["generator_template"] = {
                        "id": ex.generator_template.id.value,
                        "language": ex.generator_template.template_language.value,
                        "line_break": ex.generator_template.line_break,
                    }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_augmented_jsonl(path, pair: LanguagePair) -> Demonstration:
    examples = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line in handle:
            record = json.loads(line)
            template = None
            if record.get("generator_template"):
                raw = record["generator_template"]
                template = PromptTemplate(
                    TemplateId(raw["id"]), TemplateLanguage(raw["language"]), raw["line_break"]
                )
            examples.append(
                AugmentedExample(
                    id=record["id"],
                    source_text=record["src"],
                    target_text=record["tgt"],
                    pair=pair,
                    provenance=Provenance(record.get("provenance", "random_pair")),
                    generator_template=template,
                )
            )
    return Demonstration(tuple(examples), pair)
