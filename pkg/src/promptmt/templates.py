"""Prompt rendering for zero-shot, few-shot and one-sided demonstrations.

Six template shapes (A..F), each renderable in any template language and
with or without a line break at the separator position. Rendering is pure
string concatenation: a few-shot prompt is the demonstration blocks in list
order followed by the zero-shot block of the test input.

Spacing rules: the separator is one ASCII space, or "\\n" when line breaks
are enabled; consecutive demonstration blocks are joined by the same
separator; the final target-side cue always ends with exactly one trailing
space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Mapping, Sequence

from .corpus import LangCode, LanguagePair, MonolingualExample, ParallelExample
from .errors import ConfigError


class TemplateId(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"


class TemplateLanguage(str, Enum):
    ENGLISH = "english"
    GERMAN = "german"
    CHINESE = "chinese"


class MonoSide(str, Enum):
    SOURCE_ONLY = "source_only"
    TARGET_ONLY = "target_only"


@dataclass(frozen=True)
class PromptTemplate:
    id: TemplateId
    template_language: TemplateLanguage = TemplateLanguage.ENGLISH
    line_break: bool = False

    @property
    def separator(self) -> str:
        return "\n" if self.line_break else " "


TEMPLATE_A_EN = PromptTemplate(TemplateId.A, TemplateLanguage.ENGLISH, line_break=False)


@dataclass(frozen=True)
class Demonstration:
    """Ordered prompt examples sharing one language pair (which may differ
    from the test pair in transfer settings)."""

    examples: tuple[ParallelExample, ...]
    prompt_pair: LanguagePair

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        for ex in self.examples:
            if ex.pair != self.prompt_pair:
                raise ValueError(
                    f"example {ex.id!r} has pair {ex.pair}, demonstration is {self.prompt_pair}"
                )

    def __len__(self) -> int:
        return len(self.examples)


@dataclass(frozen=True)
class LanguageNameTable:
    """Display names and instruction phrases per template language.

    Editable as a JSON config file so that new languages or rewordings need
    no code change; the shipped default covers en/de/zh.
    """

    labels: Mapping[str, Mapping[str, str]]
    colon: Mapping[str, str]
    phrases: Mapping[str, Mapping[str, str]]

    def name(self, lang: LangCode, template_language: TemplateLanguage) -> str:
        try:
            return self.labels[template_language.value][lang.code]
        except KeyError:
            raise ConfigError(
                f"no {template_language.value} display name for language {lang.code!r}"
            )

    def colon_for(self, template_language: TemplateLanguage) -> str:
        try:
            return self.colon[template_language.value]
        except KeyError:
            raise ConfigError(f"no colon token for template language {template_language.value!r}")

    def phrase(self, key: str, template_language: TemplateLanguage) -> str:
        try:
            return self.phrases[template_language.value][key]
        except KeyError:
            raise ConfigError(
                f"no {key!r} phrase for template language {template_language.value!r}"
            )

    @classmethod
    def from_file(cls, path) -> "LanguageNameTable":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        return cls._from_dict(raw, source=str(path))

    @classmethod
    def _from_dict(cls, raw: dict, source: str) -> "LanguageNameTable":
        for key in ("labels", "colon", "phrases"):
            if key not in raw:
                raise ConfigError(f"{source}: language table misses section {key!r}")
        return cls(labels=raw["labels"], colon=raw["colon"], phrases=raw["phrases"])


def _load_default_table() -> LanguageNameTable:
    data = resources.files("promptmt").joinpath("data/language_names.json").read_text("utf-8")
    return LanguageNameTable._from_dict(json.loads(data), source="<package default>")


DEFAULT_LANGUAGE_TABLE = _load_default_table()


def _label(name: str, table: LanguageNameTable, tl: TemplateLanguage) -> str:
    return name + table.colon_for(tl)


def _cue(template: PromptTemplate, pair: LanguagePair, table: LanguageNameTable) -> str:
    """Target-side cue closing every prompt; ends with one trailing space."""
    tl = template.template_language
    src_name = table.name(pair.src, tl)
    tgt_name = table.name(pair.tgt, tl)
    if template.id in (TemplateId.A, TemplateId.B):
        cue = _label(tgt_name, table, tl)
    elif template.id in (TemplateId.C, TemplateId.E):
        cue = table.phrase("translate_to", tl).format(tgt=tgt_name) + table.colon_for(tl)
    else:  # D, F
        cue = (
            table.phrase("translate_from_to", tl).format(src=src_name, tgt=tgt_name)
            + table.colon_for(tl)
        )
    if not cue.endswith(" "):
        cue += " "
    return cue


def render_zero_shot(
    template: PromptTemplate,
    pair: LanguagePair,
    input_text: str,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> str:
    """Render the zero-shot prompt for one input sentence.

    The input appears verbatim; templates A, E and F prefix it with the
    source-language label, B, C and D leave it bare.
    """
    if not input_text:
        raise ValueError("input text must be nonempty")
    tl = template.template_language
    if template.id in (TemplateId.A, TemplateId.E, TemplateId.F):
        head = _label(table.name(pair.src, tl), table, tl) + input_text
    else:
        head = input_text
    return head + template.separator + _cue(template, pair, table)


def render_few_shot(
    template: PromptTemplate,
    test_pair: LanguagePair,
    demo: Demonstration,
    input_text: str,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> str:
    """Concatenate completed demonstration blocks, then the zero-shot test block.

    Each block is the example's zero-shot rendering completed with its target
    text plus one separator; K = 0 reduces byte-exactly to render_zero_shot.
    """
    blocks = [
        render_zero_shot(template, demo.prompt_pair, ex.source_text, table)
        + ex.target_text
        + template.separator
        for ex in demo.examples
    ]
    return "".join(blocks) + render_zero_shot(template, test_pair, input_text, table)


def render_one_sided(
    template: PromptTemplate,
    test_pair: LanguagePair,
    mono: Sequence[MonolingualExample],
    side: MonoSide,
    input_text: str,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> str:
    """Prompt from monolingual examples only: one labeled block per example
    ("<name>: <text>"), then the zero-shot test block."""
    side = MonoSide(side)
    want = test_pair.src if side is MonoSide.SOURCE_ONLY else test_pair.tgt
    for m in mono:
        if m.lang != want:
            raise ValueError(
                f"{side.value} demonstration requires language {want}, "
                f"example {m.id!r} is {m.lang}"
            )
    tl = template.template_language
    name = table.name(want, tl)
    blocks = [_label(name, table, tl) + m.text + template.separator for m in mono]
    return "".join(blocks) + render_zero_shot(template, test_pair, input_text, table)


def source_cue(
    template: PromptTemplate,
    pair: LanguagePair,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> str:
    """The source-side label that opens the next example block; used as a
    generation stop sequence so the model does not run into a new block."""
    tl = template.template_language
    return _label(table.name(pair.src, tl), table, tl).rstrip()


def standard_stop_sequences(
    template: PromptTemplate,
    pair: LanguagePair,
    table: LanguageNameTable = DEFAULT_LANGUAGE_TABLE,
) -> tuple[str, ...]:
    """Decoding stops at the first line break or the next source cue,
    whichever the continuation reaches first."""
    return ("\n", source_cue(template, pair, table))
