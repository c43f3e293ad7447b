"""promptmt: a desk-scale laboratory for prompting LLMs to translate.

The pipeline is organized as: corpus loading and splitting, prompt
templates, pluggable generation/scoring backends with a transparent cache,
demonstration features, example selection, monolingual augmentation,
metrics, and a config-driven experiment runner with a CLI.
"""

from .corpus import (
    DocumentCorpus,
    ExamplePool,
    LangCode,
    LanguagePair,
    MonolingualExample,
    ParallelExample,
    PoolFormat,
    PoolTier,
    chunk_document,
    load_monolingual,
    load_pool,
    split_ablation,
)
from .templates import (
    Demonstration,
    LanguageNameTable,
    MonoSide,
    PromptTemplate,
    TemplateId,
    TemplateLanguage,
    render_few_shot,
    render_one_sided,
    render_zero_shot,
)
from .backend import (
    Backend,
    CachingBackend,
    CachingScorer,
    EmbeddingVector,
    GenerationRequest,
    GenerationResult,
    HttpBackend,
    HttpScorer,
    MockBackend,
    MockScorer,
    ResponseCache,
    RuleBackend,
    Scorer,
    ScoreResult,
    with_cache,
)
from .features import FeatureVector, compute_all, token_count
from .selection import (
    CombinedParams,
    Ordering,
    SelectionParams,
    select_combined,
    select_random,
    select_topk_by_feature,
)
from .augment import (
    AugmentedExample,
    Provenance,
    build_back_translated,
    build_forward_translated,
    build_random_pairs,
)
from .metrics import BleuConfig, BleuTokenizer, CorrelationResult, corpus_bleu, doc_bleu, spearman
from .runner import (
    ExperimentConfig,
    RunReport,
    emit_plot_data,
    run_correlation_study,
    run_pivoting,
    run_transfer_study,
    run_translation,
)

__version__ = "0.1.0"
