"""Data model and ingestion for parallel/monolingual pools, ablation splits
and document chunking.

All types are immutable after construction and safe to share across threads.
Loading strips only the trailing newline of each record; text is otherwise
kept byte-exact so downstream metrics see the corpus as distributed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import EmptyPoolError, PoolParseError


@dataclass(frozen=True)
class LangCode:
    """Lowercase language identifier ("en", "de", "zh", ...).

    Any nonempty code is accepted; display names come from the language-name
    table, which is where new languages are registered.
    """

    code: str

    def __post_init__(self):
        code = self.code.strip().lower()
        if not code:
            raise ValueError("language code must be nonempty")
        object.__setattr__(self, "code", code)

    def __str__(self) -> str:
        return self.code


EN = LangCode("en")
DE = LangCode("de")
ZH = LangCode("zh")


@dataclass(frozen=True)
class LanguagePair:
    src: LangCode
    tgt: LangCode

    def __post_init__(self):
        if self.src == self.tgt:
            raise ValueError(f"source and target language must differ, got {self.src}")

    def reversed(self) -> "LanguagePair":
        return LanguagePair(self.tgt, self.src)

    def __str__(self) -> str:
        return f"{self.src}-{self.tgt}"

    @classmethod
    def parse(cls, text: str) -> "LanguagePair":
        """Parse "de-en" style direction strings."""
        src, sep, tgt = text.partition("-")
        if not sep or not src or not tgt:
            raise ValueError(f"expected '<src>-<tgt>' direction, got {text!r}")
        return cls(LangCode(src), LangCode(tgt))


@dataclass(frozen=True)
class ParallelExample:
    """One (source, target) sentence pair; the unit of demonstration."""

    id: str
    source_text: str
    target_text: str
    pair: LanguagePair

    def __post_init__(self):
        if not self.id:
            raise ValueError("example id must be nonempty")
        if not self.source_text.strip() or not self.target_text.strip():
            raise ValueError(f"example {self.id!r}: source or target empty after trimming")


@dataclass(frozen=True)
class MonolingualExample:
    id: str
    text: str
    lang: LangCode

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"monolingual example {self.id!r}: text empty after trimming")


class PoolTier(str, Enum):
    HIGH_QUALITY = "high_quality"
    LOW_QUALITY = "low_quality"


@dataclass(frozen=True)
class ExamplePool:
    """Ordered, tagged collection of parallel examples with unique ids."""

    pair: LanguagePair
    tier: PoolTier
    examples: tuple[ParallelExample, ...]

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        seen: set[str] = set()
        for ex in self.examples:
            if ex.pair != self.pair:
                raise ValueError(f"example {ex.id!r} has pair {ex.pair}, pool is {self.pair}")
            if ex.id in seen:
                raise ValueError(f"duplicate example id {ex.id!r} in pool")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[ParallelExample]:
        return iter(self.examples)

    def by_id(self, example_id: str) -> ParallelExample:
        for ex in self.examples:
            if ex.id == example_id:
                return ex
        raise KeyError(example_id)


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[ParallelExample, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))


@dataclass(frozen=True)
class DocumentCorpus:
    documents: tuple[Document, ...]

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))


class PoolFormat(str, Enum):
    JSONL = "jsonl"
    TSV = "tsv"


def _parse_tsv_record(path: Path, line_no: int, line: str) -> tuple[str | None, str, str]:
    """One TSV record -> (explicit_id, src, tgt).

    Two columns are source/target; three columns with a numeric first field
    are the WikiMatrix layout (score, source, target) and the score is dropped.
    """
    fields = line.split("\t")
    if len(fields) == 2:
        return None, fields[0], fields[1]
    if len(fields) == 3:
        try:
            float(fields[0])
        except ValueError:
            raise PoolParseError(path, line_no, "3-column TSV must start with a numeric score")
        return None, fields[1], fields[2]
    raise PoolParseError(path, line_no, f"expected 2 or 3 tab-separated fields, got {len(fields)}")


def _parse_jsonl_record(path: Path, line_no: int, line: str) -> tuple[str | None, str, str]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PoolParseError(path, line_no, f"invalid JSON: {exc.msg}")
    if not isinstance(record, dict):
        raise PoolParseError(path, line_no, "record must be a JSON object")
    try:
        src, tgt = record["src"], record["tgt"]
    except KeyError as exc:
        raise PoolParseError(path, line_no, f"missing field {exc.args[0]!r}")
    if not isinstance(src, str) or not isinstance(tgt, str):
        raise PoolParseError(path, line_no, "'src' and 'tgt' must be strings")
    explicit_id = record.get("id")
    if explicit_id is not None and not isinstance(explicit_id, str):
        raise PoolParseError(path, line_no, "'id' must be a string when present")
    return explicit_id, src, tgt


def _read_records(path: Path, fmt: PoolFormat) -> list[tuple[int, str | None, str, str]]:
    records = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if fmt is PoolFormat.TSV:
                explicit_id, src, tgt = _parse_tsv_record(path, line_no, line)
            else:
                explicit_id, src, tgt = _parse_jsonl_record(path, line_no, line)
            records.append((line_no, explicit_id, src, tgt))
    return records


def load_pool(path, fmt: PoolFormat | str, pair: LanguagePair, tier: PoolTier | str) -> ExamplePool:
    """Load a parallel pool from a JSONL or TSV file.

    Records keep file order; ids are auto-assigned as "<filename>:<line#>"
    when the record carries none. Duplicate explicit ids and malformed
    records raise, an empty file raises EmptyPoolError.
    """
    path = Path(path)
    fmt = PoolFormat(fmt)
    tier = PoolTier(tier)
    records = _read_records(path, fmt)
    if not records:
        raise EmptyPoolError(f"{path}: pool file contains no records")
    examples = []
    seen: set[str] = set()
    for line_no, explicit_id, src, tgt in records:
        example_id = explicit_id if explicit_id is not None else f"{path.name}:{line_no}"
        if example_id in seen:
            raise PoolParseError(path, line_no, f"duplicate example id {example_id!r}")
        seen.add(example_id)
        try:
            examples.append(ParallelExample(example_id, src, tgt, pair))
        except ValueError as exc:
            raise PoolParseError(path, line_no, str(exc))
    return ExamplePool(pair, tier, tuple(examples))


def load_monolingual(path, lang: LangCode) -> list[MonolingualExample]:
    """Load a one-sentence-per-line monolingual file."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line_no, raw in enumerate(handle, start=1):
            text = raw.rstrip("\n").rstrip("\r")
            if not text.strip():
                raise PoolParseError(path, line_no, "blank line in monolingual file")
            out.append(MonolingualExample(f"{path.name}:{line_no}", text, lang))
    return out


def load_documents(path, pair: LanguagePair) -> DocumentCorpus:
    """Load a document corpus: one {"doc_id", "sentences": [{"src","tgt"},...]} object per line."""
    path = Path(path)
    documents = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line_no, raw in enumerate(handle, start=1):
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise PoolParseError(path, line_no, f"invalid JSON: {exc.msg}")
            try:
                doc_id = record["doc_id"]
                sentences = record["sentences"]
            except (TypeError, KeyError):
                raise PoolParseError(path, line_no, "record must carry 'doc_id' and 'sentences'")
            examples = []
            for idx, sent in enumerate(sentences):
                try:
                    examples.append(
                        ParallelExample(f"{doc_id}:{idx}", sent["src"], sent["tgt"], pair)
                    )
                except (TypeError, KeyError, ValueError) as exc:
                    raise PoolParseError(path, line_no, f"sentence {idx}: {exc}")
            documents.append(Document(doc_id, tuple(examples)))
    return DocumentCorpus(tuple(documents))


def dump_pool_jsonl(examples: Iterable[ParallelExample], path) -> None:
    """Serialize examples as JSONL; text fields round-trip byte-exactly."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for ex in examples:
            handle.write(
                json.dumps(
                    {"id": ex.id, "src": ex.source_text, "tgt": ex.target_text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def split_ablation(
    pool: ExamplePool, n_test: int, seed: int
) -> tuple[list[ParallelExample], ExamplePool]:
    """Split a pool into a held-out test set and the remaining selection pool.

    Sampling is without replacement with a Mersenne Twister (random.Random)
    seeded by `seed`, drawn over the id-sorted example list; the selected id
    set therefore depends only on the ids present, not on pool order.
    """
    if n_test >= len(pool):
        raise ValueError(f"n_test={n_test} must be smaller than the pool size {len(pool)}")
    if n_test < 1:
        raise ValueError("n_test must be at least 1")
    ids_sorted = sorted(ex.id for ex in pool)
    rng = random.Random(seed)
    test_ids = set(rng.sample(ids_sorted, n_test))
    test_set = [ex for ex in pool if ex.id in test_ids]
    rest = tuple(ex for ex in pool if ex.id not in test_ids)
    return test_set, ExamplePool(pool.pair, pool.tier, rest)


def chunk_document(sentences: Sequence, chunk_size: int) -> list[list]:
    """Partition a sentence sequence into non-overlapping, order-preserving
    chunks of `chunk_size`; the final chunk may be shorter and is never
    merged backward. An empty document yields an empty list.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    items = list(sentences)
    return [items[i : i + chunk_size] for i in range(0, len(items), chunk_size)]


def sample_examples(pool: ExamplePool, n: int, seed: int) -> list[ParallelExample]:
    """Seeded sample of n distinct examples, keyed on ids like split_ablation."""
    if n > len(pool):
        raise ValueError(f"cannot sample {n} from a pool of {len(pool)}")
    ids_sorted = sorted(ex.id for ex in pool)
    chosen = set(random.Random(seed).sample(ids_sorted, n))
    return [ex for ex in pool if ex.id in chosen]
