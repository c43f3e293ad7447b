import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptmt.corpus import ExamplePool, ParallelExample, PoolTier
from promptmt.errors import SelectionError
from promptmt.features import token_count
from promptmt.selection import (
    CombinedParams,
    Ordering,
    SelectionParams,
    combined_stage_sizes,
    demonstration_digest,
    demonstration_to_jsonl,
    load_demonstration_jsonl,
    order_demonstration,
    passes_length_filter,
    select_combined,
    select_random,
    select_topk_by_feature,
)

from conftest import DE_EN, make_example, make_pool


def words_pool(lengths, pair=DE_EN):
    """Pool whose example i has `lengths[i]` tokens on both sides."""
    examples = []
    for i, n in enumerate(lengths):
        src = " ".join([f"q{i:03d}"] + ["w"] * (n - 1))
        tgt = " ".join([f"t{i:03d}"] + ["v"] * (n - 1))
        examples.append(ParallelExample(f"e{i:03d}", src, tgt, pair))
    return ExamplePool(pair, PoolTier.HIGH_QUALITY, tuple(examples))


# --- independent staged oracle (sorts + slices, written against the stated
# stage semantics, not the library pipeline) ---------------------------------


def staged_oracle(pool, sem, lm, tlen, k, params):
    n = len(pool.examples)
    keep1 = params.sem_keep if params.sem_keep < n else n
    ranked_sem = sorted(pool.examples, key=lambda e: (-sem[e.id], e.id))
    kept = ranked_sem[:keep1]
    drop = math.floor(params.sem_drop * keep1 / params.sem_keep)
    kept = kept[drop:]
    keep2 = params.lm_keep if params.lm_keep < len(kept) else len(kept)
    kept = sorted(kept, key=lambda e: (-lm[e.id], e.id))[:keep2]
    final = sorted(kept, key=lambda e: (-tlen[e.id], e.id))
    return final[:k]


def test_selection_params_validation():
    with pytest.raises(ValueError):
        SelectionParams(k=0)
    with pytest.raises(ValueError):
        SelectionParams(k=1, min_tokens=10, max_tokens=10)
    with pytest.raises(ValueError):
        CombinedParams(sem_keep=10, sem_drop=10)
    with pytest.raises(ValueError):
        CombinedParams(sem_keep=10, sem_drop=2, lm_keep=9)


def test_length_filter_applies_to_both_sides():
    params = SelectionParams(k=1, min_tokens=2, max_tokens=4)
    ok = ParallelExample("a", "x y z", "u v", DE_EN)
    short_src = ParallelExample("b", "x", "u v w", DE_EN)
    long_tgt = ParallelExample("c", "x y", "u v w q r", DE_EN)
    assert passes_length_filter(ok, params)
    assert not passes_length_filter(short_src, params)
    assert not passes_length_filter(long_tgt, params)


def test_select_random_deterministic_and_filtered():
    pool = words_pool([12] * 8 + [5] * 4)
    params = SelectionParams(k=3, min_tokens=10, max_tokens=100, seed=42)
    first = select_random(pool, params)
    second = select_random(pool, params)
    assert [e.id for e in first.examples] == [e.id for e in second.examples]
    assert all(token_count(e.source_text, DE_EN.src) >= 10 for e in first.examples)


def test_select_random_takes_all_when_exactly_k_survive():
    pool = words_pool([12, 12, 12, 5, 5])
    params = SelectionParams(k=3, min_tokens=10, max_tokens=100, seed=0)
    demo = select_random(pool, params)
    assert {e.id for e in demo.examples} == {"e000", "e001", "e002"}


def test_select_random_insufficient_pool_names_count():
    pool = words_pool([5] * 6)
    with pytest.raises(SelectionError, match="0"):
        select_random(pool, SelectionParams(k=2, min_tokens=10, max_tokens=100, seed=0))


def test_topk_by_feature_basic_and_ties():
    pool = words_pool([12, 12, 12])
    values = {"e000": 3.0, "e001": 2.0, "e002": 1.0}
    params = SelectionParams(k=2, min_tokens=1, max_tokens=100, ordering=Ordering.POOL_ORDER)
    demo = select_topk_by_feature(pool, values, params)
    assert {e.id for e in demo.examples} == {"e000", "e001"}
    tied = {"e000": 2.0, "e001": 2.0, "e002": 0.0}
    demo = select_topk_by_feature(
        pool, tied, SelectionParams(k=1, min_tokens=1, max_tokens=100)
    )
    assert [e.id for e in demo.examples] == ["e000"]


def test_topk_missing_value_errors():
    pool = words_pool([12, 12])
    with pytest.raises(SelectionError):
        select_topk_by_feature(pool, {"e000": 1.0}, SelectionParams(k=1, min_tokens=1, max_tokens=99))


def test_ascending_order_puts_best_last():
    pool = words_pool([12] * 6)
    values = {f"e{i:03d}": float(i) for i in range(6)}
    params = SelectionParams(
        k=5, min_tokens=1, max_tokens=100, ordering=Ordering.ASCENDING_SCORE
    )
    demo = select_topk_by_feature(pool, values, params)
    ordered_values = [values[e.id] for e in demo.examples]
    assert ordered_values == sorted(ordered_values)
    assert demo.examples[-1].id == "e005"  # highest score adjacent to the test input


def test_order_demonstration():
    examples = [make_example(i, src_words=4, tgt_words=4) for i in range(3)]
    demo = order_demonstration(examples, [3.0, 1.0, 2.0], "ascending_score")
    assert [e.id for e in demo.examples] == ["e001", "e002", "e000"]
    identity = order_demonstration(examples, [3.0, 1.0, 2.0], Ordering.POOL_ORDER)
    assert [e.id for e in identity.examples] == ["e000", "e001", "e002"]
    stable = order_demonstration(examples, [1.0, 1.0, 1.0], "ascending_score")
    assert [e.id for e in stable.examples] == ["e000", "e001", "e002"]
    with pytest.raises(ValueError):
        order_demonstration(examples, [1.0], "ascending_score")


def test_combined_matches_oracle_on_handmade_pool():
    rng = random.Random(5)
    pool = words_pool([rng.randint(2, 30) for _ in range(20)])
    sem = {e.id: rng.random() for e in pool}
    lm = {e.id: rng.random() for e in pool}
    tlen = {e.id: float(token_count(e.target_text, DE_EN.tgt)) for e in pool}
    params = CombinedParams(sem_keep=12, sem_drop=3, lm_keep=6)
    demo = select_combined(pool, sem, lm, tlen, 4, params)
    oracle = staged_oracle(pool, sem, lm, tlen, 4, params)
    assert [e.id for e in demo.examples] == [e.id for e in oracle]


def test_combined_degenerate_pool_keeps_everything():
    # tiny pool, default stage sizes: keeps clamp to 5, drop scales to 0,
    # so k=1 returns the target-length maximum of all five
    pool = words_pool([3, 9, 6, 2, 5])
    sem = {e.id: 0.5 for e in pool}
    lm = {e.id: 0.5 for e in pool}
    tlen = {e.id: float(token_count(e.target_text, DE_EN.tgt)) for e in pool}
    demo = select_combined(pool, sem, lm, tlen, 1)
    assert demo.examples[0].id == "e001"
    assert combined_stage_sizes(CombinedParams(), 5) == (5, 0, 5)


def test_combined_full_scale_stage_sizes():
    assert combined_stage_sizes(CombinedParams(), 110000) == (11000, 1000, 1000)
    assert combined_stage_sizes(CombinedParams(), 20000) == (11000, 1000, 1000)


def test_combined_k_too_large():
    pool = words_pool([5, 5])
    values = {e.id: 1.0 for e in pool}
    with pytest.raises(SelectionError):
        select_combined(pool, values, values, values, 3)


def test_combined_missing_map_errors():
    pool = words_pool([5, 5])
    values = {"e000": 1.0}
    with pytest.raises(SelectionError):
        select_combined(pool, values, values, values, 1)


@given(st.integers(min_value=1, max_value=200), st.data())
@settings(max_examples=40, deadline=None)
def test_combined_matches_oracle_randomized(n, data):
    rng = random.Random(data.draw(st.integers(0, 2**20)))
    pool = words_pool([rng.randint(1, 40) for _ in range(n)])
    # coarse-grained values produce plenty of ties
    sem = {e.id: rng.randint(0, 8) / 4.0 for e in pool}
    lm = {e.id: rng.randint(-6, 0) / 2.0 for e in pool}
    tlen = {e.id: float(rng.randint(1, 12)) for e in pool}
    sem_keep = data.draw(st.integers(2, 15000))
    sem_drop = data.draw(st.integers(0, sem_keep - 1))
    lm_keep = data.draw(st.integers(1, sem_keep - sem_drop))
    params = CombinedParams(sem_keep=sem_keep, sem_drop=sem_drop, lm_keep=lm_keep)
    _, _, final_size = combined_stage_sizes(params, n)
    k = data.draw(st.integers(1, final_size))
    demo = select_combined(pool, sem, lm, tlen, k, params)
    oracle = staged_oracle(pool, sem, lm, tlen, k, params)
    assert [e.id for e in demo.examples] == [e.id for e in oracle]


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_topk_invariants(data):
    n = data.draw(st.integers(3, 40))
    rng = random.Random(data.draw(st.integers(0, 2**20)))
    lengths = [rng.randint(1, 20) for _ in range(n)]
    pool = words_pool(lengths)
    values = {e.id: rng.randint(0, 10) * 1.0 for e in pool}
    params = SelectionParams(
        k=data.draw(st.integers(1, 3)),
        min_tokens=1,
        max_tokens=15,
        ordering=Ordering.ASCENDING_SCORE,
    )
    survivors = [e for e in pool if passes_length_filter(e, params)]
    if len(survivors) < params.k:
        with pytest.raises(SelectionError):
            select_topk_by_feature(pool, values, params)
        return
    demo = select_topk_by_feature(pool, values, params)
    ids = [e.id for e in demo.examples]
    # subset of the pool, no duplicates, filter respected
    assert len(set(ids)) == len(ids)
    assert set(ids) <= {e.id for e in pool}
    assert all(passes_length_filter(e, params) for e in demo.examples)
    # top-k dominance: no excluded survivor strictly beats an included one
    included = {e.id for e in demo.examples}
    worst_included = min(values[i] for i in included)
    for survivor in survivors:
        if survivor.id not in included:
            assert values[survivor.id] <= worst_included
    # positive scaling changes nothing
    scale = data.draw(st.floats(min_value=0.1, max_value=90.0))
    scaled = {key: value * scale for key, value in values.items()}
    demo_scaled = select_topk_by_feature(pool, scaled, params)
    assert [e.id for e in demo_scaled.examples] == ids


def test_demonstration_serialization_round_trip(tmp_path):
    pool = words_pool([12, 13, 14])
    demo = select_random(pool, SelectionParams(k=2, min_tokens=1, max_tokens=99, seed=1))
    path = tmp_path / "demo.jsonl"
    demonstration_to_jsonl(demo, path)
    loaded = load_demonstration_jsonl(path, DE_EN)
    assert [e.id for e in loaded.examples] == [e.id for e in demo.examples]
    assert demonstration_digest(loaded) == demonstration_digest(demo)
