"""Command-line entry point.

Subcommands mirror the pipeline stages: split, features, select, augment,
translate, correlate, transfer, pivot, report. Experiment subcommands read
a declarative YAML config; flags override config fields, and the API key
comes from the PROMPTMT_API_KEY environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import augment as augment_mod
from .backend import CACHE_DIR_ENV, HttpBackend, HttpScorer, with_cache
from .corpus import (
    LanguagePair,
    PoolTier,
    dump_pool_jsonl,
    load_monolingual,
    load_pool,
    split_ablation,
)
from .errors import ConfigError, PromptMtError
from .features import compute_all, read_features_tsv, write_features_tsv
from .runner import (
    ExperimentConfig,
    RunReport,
    emit_plot_data,
    run_correlation_study,
    run_pivoting,
    run_transfer_study,
    run_translation,
    write_run_meta,
)
from .selection import (
    SelectionParams,
    demonstration_to_jsonl,
    select_random,
    select_topk_by_feature,
)
from .templates import PromptTemplate, TemplateId, TemplateLanguage


def _template_from_args(args) -> PromptTemplate:
    return PromptTemplate(
        TemplateId(args.template),
        TemplateLanguage(args.template_language),
        args.line_break,
    )


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config file (YAML)")
    parser.add_argument("--backend", dest="backend_url", help="generation endpoint URL")
    parser.add_argument("--scorer", dest="scorer_url", help="scorer sidecar base URL")
    parser.add_argument("--cache", dest="cache_dir", help="response cache directory")
    parser.add_argument("--seed", type=int, help="override the config seed list with one seed")
    parser.add_argument("--jobs", type=int, help="bounded worker count")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument(
        "--dry-run", action="store_true", help="render prompts only, no backend calls"
    )


def _load_experiment_config(args, kind: str) -> ExperimentConfig:
    if not args.config:
        raise ConfigError(f"'{kind}' needs --config")
    overrides = {
        "backend_url": args.backend_url,
        "scorer_url": args.scorer_url,
        "cache_dir": args.cache_dir or os.environ.get(CACHE_DIR_ENV),
        "jobs": args.jobs,
        "output_dir": args.output_dir,
    }
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    cfg = ExperimentConfig.from_dict(_read_config_dict(args.config), overrides)
    if cfg.kind != kind:
        raise ConfigError(f"config kind is {cfg.kind!r}, command expects {kind!r}")
    return cfg


def _read_config_dict(path) -> dict:
    import yaml

    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: experiment config must be a mapping")
    return raw


def _build_clients(cfg: ExperimentConfig):
    if cfg.backend_url is None:
        raise ConfigError("no backend URL configured (use --backend or backend_url)")
    backend = HttpBackend(cfg.backend_url)
    scorer = HttpScorer(cfg.scorer_url) if cfg.scorer_url else None
    if cfg.cache_dir:
        backend = with_cache(backend, cfg.cache_dir)
        if scorer is not None:
            scorer = with_cache(scorer, cfg.cache_dir)
    return backend, scorer


def _cmd_split(args) -> int:
    pair = LanguagePair.parse(args.pair)
    pool = load_pool(args.pool, args.format, pair, PoolTier(args.tier))
    test_set, remaining = split_ablation(pool, args.n_test, args.seed)
    dump_pool_jsonl(test_set, args.out_test)
    dump_pool_jsonl(remaining.examples, args.out_pool)
    print(f"wrote {len(test_set)} test examples and a pool of {len(remaining)}")
    return 0


def _cmd_features(args) -> int:
    pair = LanguagePair.parse(args.pair)
    pool = load_pool(args.pool, args.format, pair, PoolTier(args.tier))
    template = _template_from_args(args)
    if not args.backend_url or not args.scorer_url:
        raise ConfigError("features needs --backend and --scorer")
    backend = HttpBackend(args.backend_url)
    scorer = HttpScorer(args.scorer_url)
    cache_dir = args.cache_dir or os.environ.get(CACHE_DIR_ENV)
    if cache_dir:
        backend = with_cache(backend, cache_dir)
        scorer = with_cache(scorer, cache_dir)
    test_inputs = None
    if args.test:
        test_pool = load_pool(args.test, args.format, pair, PoolTier.HIGH_QUALITY)
        test_inputs = [ex.source_text for ex in test_pool.examples]
    rows = [
        (ex.id, compute_all(ex, test_inputs, template, backend, scorer)) for ex in pool
    ]
    write_features_tsv(rows, args.out)
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return 0


def _cmd_select(args) -> int:
    pair = LanguagePair.parse(args.pair)
    pool = load_pool(args.pool, args.format, pair, PoolTier(args.tier))
    params = SelectionParams(
        k=args.k,
        min_tokens=args.min_tokens,
        max_tokens=args.max_tokens,
        seed=args.seed,
        ordering=args.ordering,
    )
    if args.strategy == "random":
        demo = select_random(pool, params)
    else:
        if not args.features:
            raise ConfigError("feature-based selection needs --features (a features TSV)")
        table = read_features_tsv(args.features)
        feature = {"semscore": "sem_score", "lmscore": "lm_score", "mtscore": "mt_score",
                   "tlength": "tlength", "slength": "slength"}[args.strategy]
        values = {}
        for example_id, row in table.items():
            if row[feature] is None:
                raise ConfigError(f"feature {feature} missing for {example_id}")
            values[example_id] = row[feature]
        demo = select_topk_by_feature(pool, values, params)
    demonstration_to_jsonl(demo, args.out)
    print(f"wrote a {len(demo)}-shot demonstration to {args.out}")
    return 0


def _cmd_augment(args) -> int:
    pair = LanguagePair.parse(args.pair)
    if args.mode == "random":
        src_mono = load_monolingual(args.src_mono, pair.src)
        tgt_mono = load_monolingual(args.tgt_mono, pair.tgt)
        demo = augment_mod.build_random_pairs(src_mono, tgt_mono, args.k, args.seed)
    else:
        if not args.backend_url:
            raise ConfigError("translated augmentation needs --backend")
        backend = HttpBackend(args.backend_url)
        cache_dir = args.cache_dir or os.environ.get(CACHE_DIR_ENV)
        if cache_dir:
            backend = with_cache(backend, cache_dir)
        template = _template_from_args(args)
        if args.mode == "back":
            mono = load_monolingual(args.tgt_mono, pair.tgt)
            demo = augment_mod.build_back_translated(
                mono, pair, template, backend, args.k, args.seed
            )
        else:
            mono = load_monolingual(args.src_mono, pair.src)
            demo = augment_mod.build_forward_translated(
                mono, pair, template, backend, args.k, args.seed
            )
    augment_mod.augmented_to_jsonl(demo, args.out)
    print(f"wrote {len(demo)} augmented pairs to {args.out}")
    return 0


def _cmd_experiment(args, kind: str) -> int:
    cfg = _load_experiment_config(args, kind)
    backend, scorer = _build_clients(cfg)
    if kind == "translate":
        report = run_translation(cfg, backend, scorer, dry_run=args.dry_run)
    elif kind == "correlate":
        if scorer is None:
            raise ConfigError("correlate needs a scorer")
        report = run_correlation_study(cfg, backend, scorer)
    elif kind == "transfer":
        report = run_transfer_study(cfg, backend, scorer)
    else:
        report = run_pivoting(cfg, backend, scorer)
    cache_stats = getattr(getattr(backend, "cache", None), "stats", None)
    write_run_meta(cfg.output_dir, cache_stats)
    print(f"report written to {cfg.output_dir}/report.json ({len(report.rows)} rows)")
    return 0


def _cmd_report(args) -> int:
    report = RunReport.load(args.report)
    paths = emit_plot_data(report, args.out_dir)
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptmt",
        description="Prompting experiments for machine translation at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="ablation-split a pool into test set + selection pool")
    p_split.add_argument("--pool", required=True)
    p_split.add_argument("--format", default="jsonl", choices=("jsonl", "tsv"))
    p_split.add_argument("--pair", required=True, help="direction, e.g. de-en")
    p_split.add_argument("--tier", default="high_quality")
    p_split.add_argument("--n-test", type=int, default=100)
    p_split.add_argument("--seed", type=int, required=True)
    p_split.add_argument("--out-test", required=True)
    p_split.add_argument("--out-pool", required=True)
    p_split.set_defaults(func=_cmd_split)

    p_feat = sub.add_parser("features", help="compute demonstration features for a pool")
    p_feat.add_argument("--pool", required=True)
    p_feat.add_argument("--format", default="jsonl", choices=("jsonl", "tsv"))
    p_feat.add_argument("--pair", required=True)
    p_feat.add_argument("--tier", default="high_quality")
    p_feat.add_argument("--test", help="test set whose inputs drive the case-similarity features")
    p_feat.add_argument("--template", default="A", choices=list("ABCDEF"))
    p_feat.add_argument("--template-language", default="english")
    p_feat.add_argument("--line-break", action="store_true")
    p_feat.add_argument("--backend", dest="backend_url")
    p_feat.add_argument("--scorer", dest="scorer_url")
    p_feat.add_argument("--cache", dest="cache_dir")
    p_feat.add_argument("--out", required=True)
    p_feat.set_defaults(func=_cmd_features)

    p_sel = sub.add_parser("select", help="build a demonstration from a pool")
    p_sel.add_argument("--pool", required=True)
    p_sel.add_argument("--format", default="jsonl", choices=("jsonl", "tsv"))
    p_sel.add_argument("--pair", required=True)
    p_sel.add_argument("--tier", default="high_quality")
    p_sel.add_argument(
        "--strategy",
        required=True,
        choices=("random", "semscore", "lmscore", "mtscore", "tlength", "slength"),
    )
    p_sel.add_argument("--features", help="features TSV produced by the features command")
    p_sel.add_argument("--k", type=int, required=True)
    p_sel.add_argument("--min-tokens", type=int, default=10)
    p_sel.add_argument("--max-tokens", type=int, default=100)
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--ordering", default="ascending_score")
    p_sel.add_argument("--out", required=True)
    p_sel.set_defaults(func=_cmd_select)

    p_aug = sub.add_parser("augment", help="build demonstrations from monolingual data")
    p_aug.add_argument("--mode", required=True, choices=("random", "back", "forward"))
    p_aug.add_argument("--pair", required=True)
    p_aug.add_argument("--src-mono")
    p_aug.add_argument("--tgt-mono")
    p_aug.add_argument("--k", type=int, required=True)
    p_aug.add_argument("--seed", type=int, required=True)
    p_aug.add_argument("--template", default="A", choices=list("ABCDEF"))
    p_aug.add_argument("--template-language", default="english")
    p_aug.add_argument("--line-break", action="store_true")
    p_aug.add_argument("--backend", dest="backend_url")
    p_aug.add_argument("--cache", dest="cache_dir")
    p_aug.add_argument("--out", required=True)
    p_aug.set_defaults(func=_cmd_augment)

    for kind, help_text in (
        ("translate", "direction x strategy x K x seed translation sweep"),
        ("correlate", "demonstration-feature correlation study"),
        ("transfer", "cross-setting transfer study"),
        ("pivot", "direct vs pivoting comparison"),
    ):
        p_exp = sub.add_parser(kind, help=help_text)
        _add_common_flags(p_exp)
        p_exp.set_defaults(func=lambda args, kind=kind: _cmd_experiment(args, kind))

    p_rep = sub.add_parser("report", help="emit plot CSVs from a saved report")
    p_rep.add_argument("--report", required=True, help="path to report.json")
    p_rep.add_argument("--out-dir", required=True)
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PromptMtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
