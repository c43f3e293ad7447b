"""Config-driven orchestration of the experiment protocols: translation
sweeps, correlation studies, transfer studies and pivoting, plus plot-data
emission.

Reports are fully deterministic given (config, seeds, backend responses):
no timestamps or volatile counters enter report.json, every score row
carries the seed and a digest of its demonstration, and per-row prompts and
outputs are persisted so any score can be recomputed from the artifacts and
the backend cache alone. Volatile run information (cache statistics) goes
to a separate run_meta.json.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from .augment import build_back_translated, build_forward_translated, build_random_pairs
from .backend import Backend, GenerationRequest, Scorer
from .corpus import (
    ExamplePool,
    LangCode,
    LanguagePair,
    MonolingualExample,
    ParallelExample,
    PoolFormat,
    PoolTier,
    chunk_document,
    load_documents,
    load_monolingual,
    load_pool,
    sample_examples,
    split_ablation,
)
from .errors import (
    ConfigError,
    ContextOverflowError,
    ProtocolError,
    TransportError,
    UndefinedCorrelationError,
)
from .features import FEATURE_NAMES, compute_all, lm_score, sem_score, token_count
from .metrics import BleuConfig, BleuTokenizer, comet_batch, corpus_bleu, doc_bleu, spearman
from .selection import (
    CombinedParams,
    Ordering,
    SelectionParams,
    demonstration_digest,
    demonstration_to_jsonl,
    select_combined,
    select_random,
    select_topk_by_feature,
)
from .templates import (
    Demonstration,
    MonoSide,
    PromptTemplate,
    TemplateId,
    TemplateLanguage,
    render_few_shot,
    render_one_sided,
    standard_stop_sequences,
)

log = logging.getLogger(__name__)

# Protocol sample sizes used by the study designs.
PROTOCOL_DEFAULTS = {
    "correlation_samples": 600,
    "cross_lingual_samples": 300,
    "cross_domain_samples": 200,
    "per_k_samples": 100,
    "demos_per_direction": 3,
}

FEATURE_STRATEGIES = ("slength", "tlength", "lmscore", "mtscore", "semscore")
MONO_STRATEGIES = (
    "mono_random",
    "source_only",
    "target_only",
    "back_translation",
    "forward_translation",
)
KNOWN_STRATEGIES = ("random", "combined") + FEATURE_STRATEGIES + MONO_STRATEGIES


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class DataSource:
    path: str
    format: PoolFormat = PoolFormat.JSONL
    tier: PoolTier = PoolTier.HIGH_QUALITY

    def __post_init__(self):
        object.__setattr__(self, "format", PoolFormat(self.format))
        object.__setattr__(self, "tier", PoolTier(self.tier))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "DataSource":
        return cls(
            path=raw["path"],
            format=raw.get("format", "jsonl"),
            tier=raw.get("tier", "high_quality"),
        )


@dataclass(frozen=True)
class DirectionData:
    pool: DataSource | None = None
    test: DataSource | None = None
    mono_src: DataSource | None = None
    mono_tgt: DataSource | None = None
    documents: DataSource | None = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "DirectionData":
        def source(key):
            return DataSource.from_dict(raw[key]) if key in raw else None

        return cls(
            pool=source("pool"),
            test=source("test"),
            mono_src=source("mono_src"),
            mono_tgt=source("mono_tgt"),
            documents=source("documents"),
        )

    def sources(self):
        return [
            s
            for s in (self.pool, self.test, self.mono_src, self.mono_tgt, self.documents)
            if s is not None
        ]


@dataclass(frozen=True)
class AblationSpec:
    n_test: int = 100
    seed: int = 0


@dataclass(frozen=True)
class SelectionSpec:
    min_tokens: int = 10
    max_tokens: int = 100
    ordering: Ordering = Ordering.ASCENDING_SCORE

    def __post_init__(self):
        object.__setattr__(self, "ordering", Ordering(self.ordering))

    def params(self, k: int, seed: int) -> SelectionParams:
        return SelectionParams(
            k=k,
            min_tokens=self.min_tokens,
            max_tokens=self.max_tokens,
            seed=seed,
            ordering=self.ordering,
        )


@dataclass(frozen=True)
class SettingSpec:
    """One evaluation setting of a transfer study."""

    name: str
    direction: str
    pool: DataSource
    test: DataSource | None = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SettingSpec":
        return cls(
            name=raw["name"],
            direction=raw["direction"],
            pool=DataSource.from_dict(raw["pool"]),
            test=DataSource.from_dict(raw["test"]) if "test" in raw else None,
        )


@dataclass(frozen=True)
class TransferSpec:
    source: SettingSpec
    target: SettingSpec
    n_samples: int = PROTOCOL_DEFAULTS["cross_lingual_samples"]
    seed: int = 0

    def __post_init__(self):
        if self.source.name == self.target.name:
            raise ConfigError("transfer settings must have distinct names")


@dataclass(frozen=True)
class PivotSpec:
    pivot_lang: str = "en"
    k: int = 0
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    directions: tuple[str, ...]
    data: Mapping[str, DirectionData]
    template: PromptTemplate = PromptTemplate(TemplateId.A, TemplateLanguage.ENGLISH, False)
    strategies: tuple[str, ...] = ("random",)
    k_list: tuple[int, ...] = (1,)
    seeds: tuple[int, ...] = (0,)
    ablation: AblationSpec | None = None
    sample_size: int | None = None
    selection: SelectionSpec = SelectionSpec()
    combined: CombinedParams = CombinedParams()
    transfer: TransferSpec | None = None
    pivot: PivotSpec | None = None
    output_dir: str = "runs/out"
    jobs: int = 1
    max_new_tokens: int = 256
    chunk_size: int = 4
    backend_url: str | None = None
    scorer_url: str | None = None
    cache_dir: str | None = None

    def __post_init__(self):
        for strategy in self.strategies:
            if strategy not in KNOWN_STRATEGIES and strategy != "zero_shot":
                raise ConfigError(f"unknown strategy {strategy!r}")
        if not self.seeds:
            raise ConfigError("seeds must be explicit and nonempty")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def validate_paths(self) -> None:
        sources: list[DataSource] = []
        for data in self.data.values():
            sources.extend(data.sources())
        if self.transfer is not None:
            for setting in (self.transfer.source, self.transfer.target):
                sources.append(setting.pool)
                if setting.test is not None:
                    sources.append(setting.test)
        for source in sources:
            if not Path(source.path).exists():
                raise ConfigError(f"referenced path does not exist: {source.path}")

    def digest(self) -> str:
        canonical = json.dumps(
            dataclasses.asdict(self), sort_keys=True, ensure_ascii=False, default=str
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: Mapping, overrides: Mapping | None = None) -> "ExperimentConfig":
        merged = dict(raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value
        template_raw = merged.get("template", {})
        template = PromptTemplate(
            TemplateId(template_raw.get("id", "A")),
            TemplateLanguage(template_raw.get("language", "english")),
            bool(template_raw.get("line_break", False)),
        )
        data = {
            direction: DirectionData.from_dict(entry)
            for direction, entry in merged.get("data", {}).items()
        }
        ablation = None
        if "ablation" in merged and merged["ablation"] is not None:
            ablation = AblationSpec(**merged["ablation"])
        selection = SelectionSpec(**merged.get("selection", {}))
        combined = CombinedParams(**merged.get("combined", {}))
        transfer = None
        if merged.get("transfer"):
            transfer_raw = merged["transfer"]
            transfer = TransferSpec(
                source=SettingSpec.from_dict(transfer_raw["source"]),
                target=SettingSpec.from_dict(transfer_raw["target"]),
                n_samples=transfer_raw.get(
                    "n_samples", PROTOCOL_DEFAULTS["cross_lingual_samples"]
                ),
                seed=transfer_raw.get("seed", 0),
            )
        pivot = None
        if merged.get("pivot"):
            pivot = PivotSpec(**merged["pivot"])
        if "seeds" not in merged:
            raise ConfigError("experiment configs must list seeds explicitly")
        return cls(
            kind=merged["kind"],
            directions=tuple(merged.get("directions", ())),
            data=data,
            template=template,
            strategies=tuple(merged.get("strategies", ("random",))),
            k_list=tuple(merged.get("k_list", (1,))),
            seeds=tuple(merged.get("seeds", (0,))),
            ablation=ablation,
            sample_size=merged.get("sample_size"),
            selection=selection,
            combined=combined,
            transfer=transfer,
            pivot=pivot,
            output_dir=merged.get("output_dir", "runs/out"),
            jobs=int(merged.get("jobs", 1)),
            max_new_tokens=int(merged.get("max_new_tokens", 256)),
            chunk_size=int(merged.get("chunk_size", 4)),
            backend_url=merged.get("backend_url"),
            scorer_url=merged.get("scorer_url"),
            cache_dir=merged.get("cache_dir"),
        )

    @classmethod
    def from_file(cls, path, overrides: Mapping | None = None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: experiment config must be a mapping")
        return cls.from_dict(raw, overrides)


# ---------------------------------------------------------------------------
# Report model


@dataclass(frozen=True)
class ScoreRow:
    direction: str
    strategy: str
    k: int
    seed: int | None
    n: int
    bleu: float | None
    comet: float | None
    demo_digest: str
    status: str = "ok"
    failed_segments: int = 0
    outputs_file: str = ""


@dataclass(frozen=True)
class CorrelationRow:
    scope: str
    feature: str
    metric: str
    rho: float | None
    p_value: float | None
    n: int
    note: str = ""


@dataclass(frozen=True)
class DeltaRow:
    setting: str
    metric: str
    delta: float


@dataclass(frozen=True)
class LatencyRow:
    direction: str
    strategy: str
    k: int
    seed: int | None
    tokens_generated: int
    wall_time_s: float
    seconds_per_token: float


@dataclass(frozen=True)
class RunReport:
    kind: str
    config_digest: str
    rows: tuple[ScoreRow, ...] = ()
    averages: tuple[ScoreRow, ...] = ()
    correlations: tuple[CorrelationRow, ...] = ()
    deltas: tuple[DeltaRow, ...] = ()
    latency: tuple[LatencyRow, ...] = ()
    provenance: Mapping = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            dataclasses.asdict(self), sort_keys=True, indent=2, ensure_ascii=False
        )

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / "report.json"
        report_path.write_text(self.to_json() + "\n", encoding="utf-8")
        write_report_rows_tsv(self.rows, out_dir / "rows.tsv")
        if self.averages:
            write_report_rows_tsv(self.averages, out_dir / "averages.tsv")
        return report_path

    @classmethod
    def load(cls, path) -> "RunReport":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            kind=raw["kind"],
            config_digest=raw["config_digest"],
            rows=tuple(ScoreRow(**row) for row in raw.get("rows", ())),
            averages=tuple(ScoreRow(**row) for row in raw.get("averages", ())),
            correlations=tuple(CorrelationRow(**row) for row in raw.get("correlations", ())),
            deltas=tuple(DeltaRow(**row) for row in raw.get("deltas", ())),
            latency=tuple(LatencyRow(**row) for row in raw.get("latency", ())),
            provenance=raw.get("provenance", {}),
        )


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def write_report_rows_tsv(rows: Sequence[ScoreRow], path) -> None:
    """Score rows as TSV: direction, strategy, K, BLEU, COMET, n, seed, demo hash."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("direction\tstrategy\tk\tbleu\tcomet\tn\tseed\tdemo_digest\n")
        for row in rows:
            handle.write(
                "\t".join(
                    (
                        row.direction,
                        row.strategy,
                        str(row.k),
                        _fmt(row.bleu),
                        _fmt(row.comet),
                        str(row.n),
                        _fmt(row.seed),
                        row.demo_digest,
                    )
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Shared machinery


def bleu_config_for(pair: LanguagePair) -> BleuConfig:
    tokenizer = (
        BleuTokenizer.ZH_CHARACTER if pair.tgt.code == "zh" else BleuTokenizer.INTL_13A_STYLE
    )
    return BleuConfig(tokenizer=tokenizer)


@dataclass(frozen=True)
class OneSidedPlan:
    """Prompt plan for the monolingual-only settings: labeled single-side
    blocks instead of completed pairs."""

    mono: tuple[MonolingualExample, ...]
    side: MonoSide



def _load_direction_data(
    cfg: ExperimentConfig, direction: str
) -> tuple[ExamplePool | None, list[ParallelExample]]:
    """Resolve (selection pool, test examples) for one direction.

    An explicit test source wins; otherwise the pool is ablation-split with
    the configured n_test and seed.
    """
    if direction not in cfg.data:
        raise ConfigError(f"no data entry for direction {direction!r}")
    entry = cfg.data[direction]
    pair = LanguagePair.parse(direction)
    pool = None
    if entry.pool is not None:
        pool = load_pool(entry.pool.path, entry.pool.format, pair, entry.pool.tier)
    if entry.test is not None:
        test_pool = load_pool(entry.test.path, entry.test.format, pair, PoolTier.HIGH_QUALITY)
        return pool, list(test_pool.examples)
    if pool is None:
        raise ConfigError(f"direction {direction!r} has neither a test set nor a pool")
    ablation = cfg.ablation or AblationSpec()
    test_set, remaining = split_ablation(pool, ablation.n_test, ablation.seed)
    return remaining, test_set


def _load_mono(cfg: ExperimentConfig, direction: str, which: str) -> list[MonolingualExample]:
    entry = cfg.data[direction]
    source = entry.mono_src if which == "src" else entry.mono_tgt
    if source is None:
        raise ConfigError(f"direction {direction!r} has no mono_{which} data configured")
    pair = LanguagePair.parse(direction)
    lang = pair.src if which == "src" else pair.tgt
    return load_monolingual(source.path, lang)


def _sample_mono(
    mono: Sequence[MonolingualExample], k: int, seed: int
) -> list[MonolingualExample]:
    if k > len(mono):
        raise ConfigError(f"need {k} monolingual sentences, have {len(mono)}")
    ids_sorted = sorted(m.id for m in mono)
    import random as _random

    chosen = set(_random.Random(seed).sample(ids_sorted, k))
    return [m for m in mono if m.id in chosen]


def plan_digest(plan) -> str:
    if isinstance(plan, Demonstration):
        return demonstration_digest(plan)
    canonical = json.dumps(
        {"side": plan.side.value, "mono": [[m.id, m.text] for m in plan.mono]},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class BatchResult:
    outputs: tuple[str, ...]
    prompts: tuple[str, ...]
    tokens_generated: int
    wall_time_s: float
    failed_segments: int


def _render_plan(template: PromptTemplate, test_pair: LanguagePair, plan, text: str) -> str:
    if isinstance(plan, OneSidedPlan):
        return render_one_sided(template, test_pair, list(plan.mono), plan.side, text)
    return render_few_shot(template, test_pair, plan, text)


def _translate_batch(
    backend: Backend,
    template: PromptTemplate,
    test_pair: LanguagePair,
    demo,
    inputs: Sequence[str],
    max_new_tokens: int,
    jobs: int = 1,
    dry_run: bool = False,
) -> BatchResult:
    """Render and generate for every input, in order; backend failures on a
    segment yield an empty output and are counted, the batch completes."""
    stops = standard_stop_sequences(template, test_pair)
    prompts = [_render_plan(template, test_pair, demo, text) for text in inputs]
    if dry_run:
        return BatchResult((), tuple(prompts), 0, 0.0, 0)

    def run_one(prompt: str) -> tuple[str, int, float, bool]:
        request = GenerationRequest(
            prompt,
            max_new_tokens=max_new_tokens,
            stop_sequences=stops,
        )
        try:
            result = backend.generate(request)
        except (TransportError, ContextOverflowError, ProtocolError) as exc:
            log.warning("generation failed for one segment: %s", exc)
            return "", 0, 0.0, True
        return result.text, result.tokens_generated, result.wall_time_s, False

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(run_one, prompts))
    else:
        results = [run_one(prompt) for prompt in prompts]
    outputs = tuple(text for text, _, _, _ in results)
    tokens = sum(tok for _, tok, _, _ in results)
    wall = sum(w for _, _, w, _ in results)
    failed = sum(1 for _, _, _, f in results if f)
    return BatchResult(outputs, tuple(prompts), tokens, wall, failed)


def _score_outputs(
    test_examples: Sequence[ParallelExample],
    outputs: Sequence[str],
    pair: LanguagePair,
    scorer: Scorer | None,
) -> tuple[float, float | None]:
    """Corpus BLEU plus COMET x100 presentation (None without a scorer or
    when it is degraded). Empty outputs are scored as-is."""
    refs = [ex.target_text for ex in test_examples]
    srcs = [ex.source_text for ex in test_examples]
    bleu = corpus_bleu(list(outputs), refs, bleu_config_for(pair))
    comet = None
    if scorer is not None:
        batch = comet_batch(srcs, list(outputs), refs, scorer)
        if batch is not None:
            comet = 100.0 * batch.mean
    return bleu, comet


def _persist_plan(plan, path: Path) -> None:
    if isinstance(plan, Demonstration):
        demonstration_to_jsonl(plan, path)
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for m in plan.mono:
            handle.write(
                json.dumps(
                    {"id": m.id, "text": m.text, "lang": m.lang.code, "side": plan.side.value},
                    ensure_ascii=False,
                )
                + "\n"
            )


def _persist_row_artifacts(
    out_dir: Path,
    row_id: str,
    demo,
    test_examples: Sequence[ParallelExample],
    batch: BatchResult,
) -> str:
    demos_dir = out_dir / "demos"
    outputs_dir = out_dir / "outputs"
    demos_dir.mkdir(parents=True, exist_ok=True)
    outputs_dir.mkdir(parents=True, exist_ok=True)
    _persist_plan(demo, demos_dir / f"{row_id}.jsonl")
    outputs_path = outputs_dir / f"{row_id}.jsonl"
    with open(outputs_path, "w", encoding="utf-8", newline="") as handle:
        outputs = batch.outputs if batch.outputs else ("",) * len(batch.prompts)
        for ex, prompt, output in zip(test_examples, batch.prompts, outputs):
            handle.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "prompt": prompt,
                        "output": output,
                        "ref": ex.target_text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return str(outputs_path.relative_to(out_dir))


def _feature_values_for_strategy(
    strategy: str,
    pool: ExamplePool,
    template: PromptTemplate,
    backend: Backend,
    scorer: Scorer | None,
) -> dict[str, float]:
    if strategy == "slength":
        return {ex.id: float(token_count(ex.source_text, ex.pair.src)) for ex in pool}
    if strategy == "tlength":
        return {ex.id: float(token_count(ex.target_text, ex.pair.tgt)) for ex in pool}
    if strategy == "lmscore":
        return {ex.id: lm_score(ex, template, backend) for ex in pool}
    if strategy == "semscore":
        if scorer is None:
            raise ConfigError("semscore strategy requires a scorer")
        return {ex.id: sem_score(ex, scorer) for ex in pool}
    if strategy == "mtscore":
        if scorer is None:
            raise ConfigError("mtscore strategy requires a scorer")
        values = {}
        for ex in pool:
            score = scorer.qe_score(ex.source_text, ex.target_text)
            values[ex.id] = float(score)
        return values
    raise ConfigError(f"strategy {strategy!r} has no feature values")


def build_demonstration(
    strategy: str,
    pool: ExamplePool | None,
    k: int,
    seed: int,
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer | None,
    direction: str | None = None,
):
    """Build the prompt plan for one (strategy, k, seed) cell: a
    Demonstration for pair-based strategies, a OneSidedPlan for the
    monolingual-only settings."""
    if strategy in MONO_STRATEGIES:
        if direction is None:
            raise ConfigError(f"strategy {strategy!r} needs a direction with mono data")
        pair = LanguagePair.parse(direction)
        if strategy == "mono_random":
            src_mono = _load_mono(cfg, direction, "src")
            tgt_mono = _load_mono(cfg, direction, "tgt")
            return build_random_pairs(src_mono, tgt_mono, k, seed)
        if strategy == "back_translation":
            tgt_mono = _load_mono(cfg, direction, "tgt")
            return build_back_translated(
                tgt_mono, pair, cfg.template, backend, k, seed, cfg.max_new_tokens
            )
        if strategy == "forward_translation":
            src_mono = _load_mono(cfg, direction, "src")
            return build_forward_translated(
                src_mono, pair, cfg.template, backend, k, seed, cfg.max_new_tokens
            )
        which = "src" if strategy == "source_only" else "tgt"
        side = MonoSide.SOURCE_ONLY if which == "src" else MonoSide.TARGET_ONLY
        mono = _load_mono(cfg, direction, which)
        return OneSidedPlan(tuple(_sample_mono(mono, k, seed)), side)
    if pool is None:
        raise ConfigError(f"strategy {strategy!r} needs a selection pool")
    params = cfg.selection.params(k, seed)
    if strategy == "random":
        return select_random(pool, params)
    if strategy == "combined":
        sem_values = _feature_values_for_strategy("semscore", pool, cfg.template, backend, scorer)
        lm_values = _feature_values_for_strategy("lmscore", pool, cfg.template, backend, scorer)
        tlen_values = _feature_values_for_strategy("tlength", pool, cfg.template, backend, scorer)
        return select_combined(pool, sem_values, lm_values, tlen_values, k, cfg.combined)
    values = _feature_values_for_strategy(strategy, pool, cfg.template, backend, scorer)
    return select_topk_by_feature(pool, values, params)


def _row_id(direction: str, strategy: str, k: int, seed: int | None) -> str:
    seed_part = "na" if seed is None else str(seed)
    return f"{direction.replace('-', '')}_{strategy}_k{k}_s{seed_part}"


# ---------------------------------------------------------------------------
# Experiments


def _direction_averages(rows: Sequence[ScoreRow]) -> tuple[ScoreRow, ...]:
    """Per (strategy, k): seed-mean within each direction, then the
    unweighted mean across directions."""
    per_direction: dict[tuple[str, int, str], dict[str, list]] = {}
    for row in rows:
        if row.bleu is None:
            continue
        cell = per_direction.setdefault(
            (row.strategy, row.k, row.direction), {"bleu": [], "comet": [], "n": 0}
        )
        cell["bleu"].append(row.bleu)
        if row.comet is not None:
            cell["comet"].append(row.comet)
        cell["n"] += row.n

    grouped: dict[tuple[str, int], list[dict]] = {}
    for (strategy, k, _direction), cell in sorted(per_direction.items()):
        grouped.setdefault((strategy, k), []).append(cell)
    averages = []
    for (strategy, k), cells in sorted(grouped.items()):
        bleu_means = [sum(c["bleu"]) / len(c["bleu"]) for c in cells]
        comet_cells = [c for c in cells if c["comet"]]
        comet = (
            sum(sum(c["comet"]) / len(c["comet"]) for c in comet_cells) / len(comet_cells)
            if len(comet_cells) == len(cells) and cells
            else None
        )
        averages.append(
            ScoreRow(
                direction="average",
                strategy=strategy,
                k=k,
                seed=None,
                n=sum(c["n"] for c in cells),
                bleu=sum(bleu_means) / len(bleu_means),
                comet=comet,
                demo_digest="",
            )
        )
    return tuple(averages)


def _zero_shot_deltas(rows: Sequence[ScoreRow]) -> tuple[DeltaRow, ...]:
    """Relative quality of every strategy row against its direction's
    zero-shot baseline, averaged over (k, seed) cells per strategy."""
    baselines: dict[str, ScoreRow] = {
        row.direction: row for row in rows if row.strategy == "zero_shot"
    }
    grouped: dict[tuple[str, str, str], list[float]] = {}
    for row in rows:
        if row.strategy == "zero_shot" or row.direction not in baselines:
            continue
        baseline = baselines[row.direction]
        for metric in ("bleu", "comet"):
            value = getattr(row, metric)
            base = getattr(baseline, metric)
            if value is None or base is None:
                continue
            grouped.setdefault((row.direction, row.strategy, metric), []).append(value - base)
    return tuple(
        DeltaRow(setting=f"{direction}/{strategy}", metric=metric,
                 delta=sum(values) / len(values))
        for (direction, strategy, metric), values in sorted(grouped.items())
    )


def _chunked_documents(
    cfg: ExperimentConfig, direction: str
) -> tuple[list[ParallelExample], list[list[int]]]:
    """Flatten a document corpus into chunk-level pseudo-examples plus the
    chunk-index groups per document.

    A chunk's source/target is its sentences joined with single spaces
    (no separator for Chinese), mirroring the document-level BLEU joining
    rule.
    """
    entry = cfg.data[direction]
    pair = LanguagePair.parse(direction)
    corpus = load_documents(entry.documents.path, pair)
    src_join = "" if pair.src.code == "zh" else " "
    tgt_join = "" if pair.tgt.code == "zh" else " "
    chunks: list[ParallelExample] = []
    groups: list[list[int]] = []
    for document in corpus.documents:
        if not document.sentences:  # an empty document contributes nothing
            continue
        indices = []
        for j, chunk in enumerate(chunk_document(document.sentences, cfg.chunk_size)):
            indices.append(len(chunks))
            chunks.append(
                ParallelExample(
                    f"{document.doc_id}:c{j}",
                    src_join.join(s.source_text for s in chunk),
                    tgt_join.join(s.target_text for s in chunk),
                    pair,
                )
            )
        groups.append(indices)
    return chunks, groups


def run_translation(
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer | None = None,
    dry_run: bool = False,
) -> RunReport:
    """Direction x strategy x K x seed sweep with a zero-shot baseline row
    per direction (independent of strategy and seed).

    With a `documents` data source the test unit becomes a ~chunk_size
    sentence chunk and rows report document-level BLEU over per-document
    concatenations (COMET is sentence-level and stays unreported there).
    """
    cfg.validate_paths()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[ScoreRow] = []
    latency: list[LatencyRow] = []
    for direction in cfg.directions:
        pair = LanguagePair.parse(direction)
        entry = cfg.data.get(direction)
        doc_groups: list[list[int]] | None = None
        if entry is not None and entry.documents is not None:
            test_examples, doc_groups = _chunked_documents(cfg, direction)
            pool = None
            if entry.pool is not None:
                pool = load_pool(entry.pool.path, entry.pool.format, pair, entry.pool.tier)
        else:
            pool, test_examples = _load_direction_data(cfg, direction)
        inputs = [ex.source_text for ex in test_examples]
        zero_demo = Demonstration((), pair)

        def run_row(strategy: str, k: int, seed: int | None, demo) -> None:
            row_id = _row_id(direction, strategy, k, seed)
            batch = _translate_batch(
                backend, cfg.template, pair, demo, inputs, cfg.max_new_tokens,
                jobs=cfg.jobs, dry_run=dry_run,
            )
            outputs_file = _persist_row_artifacts(out_dir, row_id, demo, test_examples, batch)
            if dry_run:
                bleu, comet = None, None
                status = "dry_run"
            elif doc_groups is not None:
                docs = [
                    (
                        [batch.outputs[i] for i in group],
                        [test_examples[i].target_text for i in group],
                    )
                    for group in doc_groups
                ]
                bleu = doc_bleu(docs, bleu_config_for(pair))
                comet = None
                status = "ok" if batch.failed_segments == 0 else "partial_failure"
            else:
                bleu, comet = _score_outputs(test_examples, batch.outputs, pair, scorer)
                status = "ok" if batch.failed_segments == 0 else "partial_failure"
            rows.append(
                ScoreRow(
                    direction=direction,
                    strategy=strategy,
                    k=k,
                    seed=seed,
                    n=len(doc_groups) if doc_groups is not None else len(test_examples),
                    bleu=bleu,
                    comet=comet,
                    demo_digest=plan_digest(demo),
                    status=status,
                    failed_segments=batch.failed_segments,
                    outputs_file=outputs_file,
                )
            )
            latency.append(
                LatencyRow(
                    direction=direction,
                    strategy=strategy,
                    k=k,
                    seed=seed,
                    tokens_generated=batch.tokens_generated,
                    wall_time_s=batch.wall_time_s,
                    seconds_per_token=(
                        batch.wall_time_s / batch.tokens_generated
                        if batch.tokens_generated
                        else 0.0
                    ),
                )
            )

        run_row("zero_shot", 0, None, zero_demo)
        for strategy in cfg.strategies:
            if strategy == "zero_shot":
                continue
            for k in cfg.k_list:
                for seed in cfg.seeds:
                    demo = build_demonstration(
                        strategy, pool, k, seed, cfg, backend, scorer, direction
                    )
                    run_row(strategy, k, seed, demo)
    report = RunReport(
        kind="translate",
        config_digest=cfg.digest(),
        rows=tuple(rows),
        averages=_direction_averages(rows),
        deltas=_zero_shot_deltas(rows),
        latency=tuple(latency),
        provenance={
            "directions": list(cfg.directions),
            "template": {
                "id": cfg.template.id.value,
                "language": cfg.template.template_language.value,
                "line_break": cfg.template.line_break,
            },
            "seeds": list(cfg.seeds),
            "k_list": list(cfg.k_list),
            "strategies": list(cfg.strategies),
        },
    )
    report.save(out_dir)
    return report


def _one_shot_scores(
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer | None,
    demos: Sequence[ParallelExample],
    test_pair: LanguagePair,
    test_examples: Sequence[ParallelExample],
) -> tuple[list[float], list[float] | None, LatencyRow]:
    """Per-demonstration 1-shot BLEU (and COMET x100) over a shared test set."""
    inputs = [ex.source_text for ex in test_examples]
    bleus: list[float] = []
    comets: list[float] = []
    comet_ok = scorer is not None
    tokens = 0
    wall = 0.0
    for demo_ex in demos:
        demo = Demonstration((demo_ex,), demo_ex.pair)
        batch = _translate_batch(
            backend, cfg.template, test_pair, demo, inputs, cfg.max_new_tokens, jobs=cfg.jobs
        )
        tokens += batch.tokens_generated
        wall += batch.wall_time_s
        bleu, comet = _score_outputs(test_examples, batch.outputs, test_pair, scorer)
        bleus.append(bleu)
        if comet is None:
            comet_ok = False
        else:
            comets.append(comet)
    latency = LatencyRow(
        direction=str(test_pair),
        strategy="one_shot_study",
        k=1,
        seed=None,
        tokens_generated=tokens,
        wall_time_s=wall,
        seconds_per_token=wall / tokens if tokens else 0.0,
    )
    return bleus, (comets if comet_ok else None), latency


def run_correlation_study(
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer,
) -> RunReport:
    """Sample demonstrations, compute their feature vectors and their 1-shot
    scores on the ablation test set, and report Spearman's rho per feature
    per direction plus the across-direction average."""
    cfg.validate_paths()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_samples = cfg.sample_size or PROTOCOL_DEFAULTS["correlation_samples"]
    correlations: list[CorrelationRow] = []
    latency: list[LatencyRow] = []
    per_direction: dict[str, dict[str, dict[str, CorrelationRow]]] = {}
    for direction in cfg.directions:
        pair = LanguagePair.parse(direction)
        pool, test_examples = _load_direction_data(cfg, direction)
        if pool is None:
            raise ConfigError(f"correlation study needs a pool for {direction!r}")
        demos = sample_examples(pool, min(n_samples, len(pool)), cfg.seeds[0])
        test_inputs = [ex.source_text for ex in test_examples]
        vectors = [
            compute_all(demo, test_inputs, cfg.template, backend, scorer) for demo in demos
        ]
        bleus, comets, lat = _one_shot_scores(
            cfg, backend, scorer, demos, pair, test_examples
        )
        latency.append(lat)
        _dump_correlation_artifact(out_dir, direction, demos, vectors, bleus, comets)
        metric_scores: dict[str, list[float] | None] = {"bleu": bleus, "comet": comets}
        for feature in FEATURE_NAMES:
            values = [vec.get(feature) for vec in vectors]
            for metric, scores in metric_scores.items():
                row = _correlation_row(direction, feature, metric, values, scores)
                correlations.append(row)
                per_direction.setdefault(feature, {}).setdefault(metric, {})[direction] = row
    for feature, by_metric in per_direction.items():
        for metric, by_direction in by_metric.items():
            defined = [row.rho for row in by_direction.values() if row.rho is not None]
            if defined:
                correlations.append(
                    CorrelationRow(
                        scope="average",
                        feature=feature,
                        metric=metric,
                        rho=sum(defined) / len(defined),
                        p_value=None,
                        n=len(defined),
                        note="mean of per-direction rhos",
                    )
                )
    report = RunReport(
        kind="correlate",
        config_digest=cfg.digest(),
        correlations=tuple(correlations),
        latency=tuple(latency),
        provenance={
            "directions": list(cfg.directions),
            "n_samples": n_samples,
            "seed": cfg.seeds[0],
        },
    )
    report.save(out_dir)
    return report


def _correlation_row(
    scope: str,
    feature: str,
    metric: str,
    values: Sequence[float | None],
    scores: Sequence[float] | None,
) -> CorrelationRow:
    if scores is None:
        return CorrelationRow(scope, feature, metric, None, None, 0, "excluded: metric degraded")
    if any(v is None for v in values):
        return CorrelationRow(
            scope, feature, metric, None, None, 0, "excluded: feature degraded"
        )
    try:
        result = spearman([float(v) for v in values], list(scores))
    except UndefinedCorrelationError:
        return CorrelationRow(
            scope, feature, metric, None, None, len(scores), "excluded: zero variance"
        )
    return CorrelationRow(scope, feature, metric, result.rho, result.p_value, result.n)


def _dump_correlation_artifact(
    out_dir: Path,
    direction: str,
    demos: Sequence[ParallelExample],
    vectors: Sequence,
    bleus: Sequence[float],
    comets: Sequence[float] | None,
) -> None:
    artifact_dir = out_dir / "correlation_scores"
    artifact_dir.mkdir(parents=True, exist_ok=True)
    path = artifact_dir / f"{direction}.tsv"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\t".join(("id",) + FEATURE_NAMES + ("bleu", "comet")) + "\n")
        for idx, (demo, vector) in enumerate(zip(demos, vectors)):
            row = vector.as_row(demo.id)
            row.append(f"{bleus[idx]:.6f}")
            row.append("NA" if comets is None else f"{comets[idx]:.6f}")
            handle.write("\t".join(row) + "\n")


def run_transfer_study(
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer | None = None,
) -> RunReport:
    """Evaluate one demonstration sample in two settings; report the
    cross-setting rank correlation and each setting's gain over zero-shot."""
    if cfg.transfer is None:
        raise ConfigError("transfer experiment needs a 'transfer' section")
    cfg.validate_paths()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.transfer
    source_pool, source_test = _load_setting(cfg, spec.source)
    target_pool, target_test = _load_setting(cfg, spec.target)
    demos = sample_examples(source_pool, min(spec.n_samples, len(source_pool)), spec.seed)

    rows: list[ScoreRow] = []
    deltas: list[DeltaRow] = []
    correlations: list[CorrelationRow] = []
    latency: list[LatencyRow] = []
    setting_scores: dict[str, dict[str, list[float] | None]] = {}
    zero_scores: dict[str, tuple[float, float | None]] = {}
    for setting, pool, test_examples in (
        (spec.source, source_pool, source_test),
        (spec.target, target_pool, target_test),
    ):
        pair = LanguagePair.parse(setting.direction)
        inputs = [ex.source_text for ex in test_examples]
        zero_batch = _translate_batch(
            backend, cfg.template, pair, Demonstration((), pair), inputs,
            cfg.max_new_tokens, jobs=cfg.jobs,
        )
        zero_bleu, zero_comet = _score_outputs(test_examples, zero_batch.outputs, pair, scorer)
        zero_scores[setting.name] = (zero_bleu, zero_comet)
        rows.append(
            ScoreRow(
                direction=setting.direction,
                strategy=f"zero_shot@{setting.name}",
                k=0,
                seed=None,
                n=len(test_examples),
                bleu=zero_bleu,
                comet=zero_comet,
                demo_digest="",
            )
        )
        bleus, comets, lat = _one_shot_scores(cfg, backend, scorer, demos, pair, test_examples)
        latency.append(lat)
        setting_scores[setting.name] = {"bleu": bleus, "comet": comets}
        _dump_per_demo_scores(out_dir, setting.name, demos, bleus, comets)
    for metric in ("bleu", "comet"):
        source_vals = setting_scores[spec.source.name][metric]
        target_vals = setting_scores[spec.target.name][metric]
        scope = f"{spec.source.name}->{spec.target.name}"
        if source_vals is None or target_vals is None:
            correlations.append(
                CorrelationRow(scope, "transfer", metric, None, None, 0, "excluded: degraded")
            )
            continue
        try:
            result = spearman(source_vals, target_vals)
            correlations.append(
                CorrelationRow(scope, "transfer", metric, result.rho, result.p_value, result.n)
            )
        except UndefinedCorrelationError:
            correlations.append(
                CorrelationRow(
                    scope, "transfer", metric, None, None, len(source_vals),
                    "excluded: zero variance",
                )
            )
        for setting in (spec.source, spec.target):
            vals = setting_scores[setting.name][metric]
            zero = zero_scores[setting.name][0 if metric == "bleu" else 1]
            if vals is None or zero is None:
                continue
            deltas.append(
                DeltaRow(
                    setting=setting.name,
                    metric=metric,
                    delta=sum(vals) / len(vals) - zero,
                )
            )
    report = RunReport(
        kind="transfer",
        config_digest=cfg.digest(),
        rows=tuple(rows),
        correlations=tuple(correlations),
        deltas=tuple(deltas),
        latency=tuple(latency),
        provenance={
            "source": spec.source.name,
            "target": spec.target.name,
            "n_samples": len(demos),
            "seed": spec.seed,
        },
    )
    report.save(out_dir)
    return report


def _dump_per_demo_scores(
    out_dir: Path,
    name: str,
    demos: Sequence[ParallelExample],
    bleus: Sequence[float],
    comets: Sequence[float] | None,
) -> None:
    """Per-demonstration score table, one file per setting, for provenance."""
    scores_dir = out_dir / "per_demo_scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    with open(scores_dir / f"{name}.tsv", "w", encoding="utf-8", newline="") as handle:
        handle.write("demo_id\tbleu\tcomet\n")
        for idx, demo in enumerate(demos):
            comet = "NA" if comets is None else f"{comets[idx]:.6f}"
            handle.write(f"{demo.id}\t{bleus[idx]:.6f}\t{comet}\n")


def _load_setting(
    cfg: ExperimentConfig, setting: SettingSpec
) -> tuple[ExamplePool, list[ParallelExample]]:
    pair = LanguagePair.parse(setting.direction)
    pool = load_pool(setting.pool.path, setting.pool.format, pair, setting.pool.tier)
    if setting.test is not None:
        test_pool = load_pool(setting.test.path, setting.test.format, pair, PoolTier.HIGH_QUALITY)
        return pool, list(test_pool.examples)
    ablation = cfg.ablation or AblationSpec()
    test_set, remaining = split_ablation(pool, ablation.n_test, ablation.seed)
    return remaining, test_set


def run_pivoting(
    cfg: ExperimentConfig,
    backend: Backend,
    scorer: Scorer | None = None,
) -> RunReport:
    """Two-hop translation through the pivot language versus direct
    translation, for every configured direction."""
    if cfg.pivot is None:
        raise ConfigError("pivot experiment needs a 'pivot' section")
    cfg.validate_paths()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pivot_lang = cfg.pivot.pivot_lang
    rows: list[ScoreRow] = []
    latency: list[LatencyRow] = []
    for direction in cfg.directions:
        pair = LanguagePair.parse(direction)
        if pivot_lang in (pair.src.code, pair.tgt.code):
            raise ConfigError(
                f"pivot language {pivot_lang!r} must differ from both sides of {direction!r}"
            )
        _, test_examples = _load_direction_data(cfg, direction)
        inputs = [ex.source_text for ex in test_examples]
        k = cfg.pivot.k
        seed = cfg.pivot.seed

        def demo_for(hop_pair: LanguagePair, hop_direction: str) -> Demonstration:
            if k == 0:
                return Demonstration((), hop_pair)
            hop_pool, _ = _load_direction_data(cfg, hop_direction)
            if hop_pool is None:
                raise ConfigError(f"few-shot pivoting needs a pool for {hop_direction!r}")
            return select_random(hop_pool, cfg.selection.params(k, seed))

        # Direct route.
        direct_demo = demo_for(pair, direction)
        direct_batch = _translate_batch(
            backend, cfg.template, pair, direct_demo, inputs, cfg.max_new_tokens, jobs=cfg.jobs
        )
        direct_row_id = _row_id(direction, "direct", k, seed)
        direct_outputs_file = _persist_row_artifacts(
            out_dir, direct_row_id, direct_demo, test_examples, direct_batch
        )
        bleu, comet = _score_outputs(test_examples, direct_batch.outputs, pair, scorer)
        rows.append(
            ScoreRow(
                direction=direction,
                strategy="direct",
                k=k,
                seed=seed if k else None,
                n=len(test_examples),
                bleu=bleu,
                comet=comet,
                demo_digest=demonstration_digest(direct_demo),
                status="ok" if direct_batch.failed_segments == 0 else "partial_failure",
                failed_segments=direct_batch.failed_segments,
                outputs_file=direct_outputs_file,
            )
        )

        # Pivot route: source -> pivot -> target.
        first_pair = LanguagePair(pair.src, LangCode(pivot_lang))
        second_pair = LanguagePair(LangCode(pivot_lang), pair.tgt)
        first_demo = demo_for(first_pair, str(first_pair))
        second_demo = demo_for(second_pair, str(second_pair))
        first_batch = _translate_batch(
            backend, cfg.template, first_pair, first_demo, inputs, cfg.max_new_tokens,
            jobs=cfg.jobs,
        )
        finals: list[str] = []
        failed = first_batch.failed_segments
        tokens = first_batch.tokens_generated
        wall = first_batch.wall_time_s
        stops = standard_stop_sequences(cfg.template, second_pair)
        for mid in first_batch.outputs:
            if not mid.strip():
                finals.append("")
                failed += 1
                continue
            prompt = render_few_shot(cfg.template, second_pair, second_demo, mid)
            try:
                result = backend.generate(
                    GenerationRequest(
                        prompt, max_new_tokens=cfg.max_new_tokens, stop_sequences=stops
                    )
                )
            except (TransportError, ContextOverflowError, ProtocolError) as exc:
                log.warning("second hop failed for one segment: %s", exc)
                finals.append("")
                failed += 1
                continue
            finals.append(result.text)
            tokens += result.tokens_generated
            wall += result.wall_time_s
        bleu, comet = _score_outputs(test_examples, finals, pair, scorer)
        pivot_row_id = _row_id(direction, "pivoting", k, seed)
        pivot_batch = BatchResult(tuple(finals), first_batch.prompts, tokens, wall, failed)
        pivot_outputs_file = _persist_row_artifacts(
            out_dir, pivot_row_id, first_demo, test_examples, pivot_batch
        )
        _persist_plan(second_demo, out_dir / "demos" / f"{pivot_row_id}_hop2.jsonl")
        rows.append(
            ScoreRow(
                direction=direction,
                strategy="pivoting",
                k=k,
                seed=seed if k else None,
                n=len(test_examples),
                bleu=bleu,
                comet=comet,
                demo_digest=demonstration_digest(first_demo),
                status="ok" if failed == 0 else "failed",
                failed_segments=failed,
                outputs_file=pivot_outputs_file,
            )
        )
        latency.append(
            LatencyRow(
                direction=direction,
                strategy="pivoting",
                k=k,
                seed=seed if k else None,
                tokens_generated=tokens,
                wall_time_s=wall,
                seconds_per_token=wall / tokens if tokens else 0.0,
            )
        )
    report = RunReport(
        kind="pivot",
        config_digest=cfg.digest(),
        rows=tuple(rows),
        latency=tuple(latency),
        provenance={"pivot_lang": pivot_lang, "directions": list(cfg.directions)},
    )
    report.save(out_dir)
    return report


# ---------------------------------------------------------------------------
# Plot data


def quantiles(values: Sequence[float], points: Sequence[float]) -> list[float]:
    """Linear-interpolation quantiles over a sorted copy of `values`."""
    if not values:
        raise ValueError("quantiles need at least one value")
    ordered = sorted(values)
    out = []
    for q in points:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile point {q} outside [0, 1]")
        position = q * (len(ordered) - 1)
        low = math.floor(position)
        high = math.ceil(position)
        if low == high:
            out.append(float(ordered[low]))
        else:
            fraction = position - low
            out.append(ordered[low] * (1.0 - fraction) + ordered[high] * fraction)
    return out


def emit_plot_data(report: RunReport, out_dir) -> list[Path]:
    """Per-K box-plot quantiles, mean +/- sd curves and the per-token latency
    series, all as CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, int], list[float]] = {}
    for row in report.rows:
        if row.bleu is None:
            continue
        groups.setdefault((row.direction, row.k), []).append(row.bleu)

    quantile_path = out_dir / "k_quantiles.csv"
    with open(quantile_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("direction,k,count,min,q1,median,q3,max\n")
        for (direction, k), values in sorted(groups.items()):
            q0, q1, q2, q3, q4 = quantiles(values, (0.0, 0.25, 0.5, 0.75, 1.0))
            handle.write(
                f"{direction},{k},{len(values)},"
                f"{q0:.6f},{q1:.6f},{q2:.6f},{q3:.6f},{q4:.6f}\n"
            )

    curve_path = out_dir / "k_curve.csv"
    with open(curve_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("direction,k,mean,sd\n")
        for (direction, k), values in sorted(groups.items()):
            mean = sum(values) / len(values)
            sd = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
            handle.write(f"{direction},{k},{mean:.6f},{sd:.6f}\n")

    latency_path = out_dir / "latency.csv"
    with open(latency_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("direction,strategy,k,seed,tokens_generated,wall_time_s,seconds_per_token\n")
        for row in report.latency:
            seed = "" if row.seed is None else row.seed
            handle.write(
                f"{row.direction},{row.strategy},{row.k},{seed},"
                f"{row.tokens_generated},{row.wall_time_s:.6f},{row.seconds_per_token:.9f}\n"
            )
    return [quantile_path, curve_path, latency_path]


def write_run_meta(out_dir, cache_stats: Mapping | None) -> Path:
    """Volatile run information kept out of the deterministic report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta_path = out_dir / "run_meta.json"
    meta_path.write_text(
        json.dumps({"cache_stats": dict(cache_stats or {})}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return meta_path
