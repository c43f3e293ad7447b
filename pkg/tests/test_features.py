import math

import pytest

from promptmt.backend import MockBackend, MockScorer, FailingScorer
from promptmt.corpus import DE, EN, ZH, LangCode, LanguagePair, ParallelExample
from promptmt.errors import DegradedScorerError, UndefinedSimilarityError
from promptmt.features import (
    FEATURE_NAMES,
    FeatureVector,
    case_sem,
    completed_block,
    compute_all,
    cosine,
    lm_score,
    mt_score,
    read_features_tsv,
    sem_score,
    token_count,
    write_features_tsv,
)
from promptmt.templates import PromptTemplate, TemplateId

from conftest import DE_EN

A_EN = PromptTemplate(TemplateId.A)
EXAMPLE = ParallelExample("x", "Hallo", "Hello", DE_EN)


def test_token_count_policies():
    assert token_count("a b c", EN) == 3
    assert token_count("你好 世界", ZH) == 4
    assert token_count("Hallo", DE) == 1
    assert token_count("  spaced   out  ", EN) == 2
    with pytest.raises(ValueError):
        token_count("   ", EN)


def test_lm_score_normalizes_over_completed_block():
    block = completed_block(EXAMPLE, A_EN)
    assert block == "German: Hallo English: Hello"
    backend = MockBackend(scores={block: (-12.0, 6)})
    assert lm_score(EXAMPLE, A_EN, backend) == -2.0
    backend_zero = MockBackend(scores={block: (0.0, 3)})
    assert lm_score(EXAMPLE, A_EN, backend_zero) == 0.0


def test_cosine_identities():
    assert cosine((1.0, 0.0), (1.0, 0.0)) == 1.0
    assert cosine((1.0, 0.0), (0.0, 1.0)) == 0.0
    assert cosine((1.0, 0.0), (-1.0, 0.0)) == -1.0
    with pytest.raises(UndefinedSimilarityError):
        cosine((0.0, 0.0), (1.0, 0.0))


def test_cosine_clamps_rounding():
    v = (0.1, 0.2, 0.30000000000000004)
    assert cosine(v, v) <= 1.0
    assert cosine(v, v) >= 1.0 - 1e-6


def test_sem_score_from_embedding_table():
    scorer = MockScorer(embeddings={"Hallo": (1.0, 0.0), "Hello": (1.0, 0.0)})
    assert sem_score(EXAMPLE, scorer) == 1.0
    opposite = MockScorer(embeddings={"Hallo": (1.0, 0.0), "Hello": (-1.0, 0.0)})
    assert sem_score(EXAMPLE, opposite) == -1.0


def test_mt_score_passthrough_and_degraded():
    assert mt_score(EXAMPLE, MockScorer(qe=0.5)) == 0.5
    assert mt_score(EXAMPLE, FailingScorer()) is None


def test_case_sem_means_over_test_inputs():
    scorer = MockScorer(
        embeddings={
            "Hallo": (1.0, 0.0),
            "Hello": (0.0, 1.0),
            "t1": (1.0, 0.0),
            "t2": (0.0, 1.0),
        }
    )
    assert case_sem(EXAMPLE, ["t1"], "src", scorer) == 1.0
    assert case_sem(EXAMPLE, ["t1", "t2"], "src", scorer) == 0.5
    assert case_sem(EXAMPLE, ["t1"], "tgt", scorer) == 0.0
    with pytest.raises(ValueError):
        case_sem(EXAMPLE, [], "src", scorer)
    with pytest.raises(ValueError):
        case_sem(EXAMPLE, ["t1"], "both", scorer)


def test_compute_all_fills_every_field():
    backend = MockBackend(scores={completed_block(EXAMPLE, A_EN): (-6.0, 3)})
    scorer = MockScorer(dim=8)
    vector = compute_all(EXAMPLE, ["t1", "t2"], A_EN, backend, scorer)
    assert all(vector.get(name) is not None for name in FEATURE_NAMES)
    again = compute_all(EXAMPLE, ["t1", "t2"], A_EN, backend, scorer)
    assert vector == again


class _QeDownScorer(MockScorer):
    def qe_score(self, src, hyp):
        raise DegradedScorerError("qe down")


def test_compute_all_degraded_qe_leaves_rest_present():
    backend = MockBackend(scores={completed_block(EXAMPLE, A_EN): (-6.0, 3)})
    vector = compute_all(EXAMPLE, ["t1"], A_EN, backend, _QeDownScorer(dim=4))
    assert vector.mt_score is None
    assert vector.sem_score is not None
    assert vector.case_sem_src is not None


def test_compute_all_without_test_inputs():
    backend = MockBackend(scores={completed_block(EXAMPLE, A_EN): (-6.0, 3)})
    vector = compute_all(EXAMPLE, None, A_EN, backend, MockScorer())
    assert vector.case_sem_src is None and vector.case_sem_tgt is None


def test_feature_vector_validation():
    with pytest.raises(ValueError):
        FeatureVector(0, 1, 0.0, None, 0.0, None, None)
    with pytest.raises(ValueError):
        FeatureVector(1, 1, 0.0, None, 1.5, None, None)


def test_features_tsv_round_trip(tmp_path):
    vector = FeatureVector(3, 4, -2.0, None, 0.25, 0.5, None)
    path = tmp_path / "features.tsv"
    write_features_tsv([("e1", vector)], path)
    table = read_features_tsv(path)
    assert table["e1"]["mt_score"] is None
    assert table["e1"]["sem_score"] == 0.25
    assert table["e1"]["slength"] == 3.0
    assert table["e1"]["case_sem_tgt"] is None
