import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptmt.backend import (
    CachingBackend,
    CachingScorer,
    EmbeddingVector,
    FailingScorer,
    GenerationRequest,
    GenerationResult,
    HttpBackend,
    HttpScorer,
    MockBackend,
    MockScorer,
    ResponseCache,
    RuleBackend,
    ScoreResult,
    canonical_payload_digest,
    truncate_at_stop,
    with_cache,
)
from promptmt.corpus import DE, EN
from promptmt.errors import (
    ContextOverflowError,
    DegradedScorerError,
    MockMissError,
    ProtocolError,
    TransportError,
)


def test_request_validation():
    with pytest.raises(ValueError):
        GenerationRequest("")
    with pytest.raises(ValueError):
        GenerationRequest("x", beam_size=0)
    with pytest.raises(ValueError):
        GenerationRequest("x", max_new_tokens=0)
    assert GenerationRequest("x").beam_size == 2


def test_result_invariants():
    with pytest.raises(ValueError):
        GenerationResult("text", 0, 0.0)
    with pytest.raises(ValueError):
        GenerationResult("", 0, -1.0)
    assert GenerationResult("", 0, 0.0).seconds_per_token == 0.0
    assert GenerationResult("ab", 4, 2.0).seconds_per_token == 0.5
    with pytest.raises(ValueError):
        ScoreResult(-1.0, 0)


def test_truncate_at_stop_earliest_wins():
    assert truncate_at_stop("Hello\nGerman: next", ("\n", "German:")) == "Hello"
    assert truncate_at_stop("Hello German: next", ("\n", "German:")) == "Hello "
    assert truncate_at_stop("Hello", ("\n",)) == "Hello"
    assert truncate_at_stop("abc", ()) == "abc"


def test_mock_backend_lookup_and_truncation():
    mock = MockBackend(generation={"German: Hallo English: ": "Hello\nGerman:"})
    result = mock.generate(
        GenerationRequest("German: Hallo English: ", stop_sequences=("\n",))
    )
    assert result.text == "Hello"
    assert result.tokens_generated == 1
    assert result.wall_time_s == 0.0


def test_mock_backend_strict_miss():
    mock = MockBackend(generation={})
    with pytest.raises(MockMissError):
        mock.generate(GenerationRequest("unknown"))
    lenient = MockBackend(generation={}, strict=False)
    assert lenient.generate(GenerationRequest("unknown")).text == ""


def test_mock_backend_scoring():
    mock = MockBackend(scores={"some text": (-12.0, 6)})
    first = mock.score_loglikelihood("some text")
    second = mock.score_loglikelihood("some text")
    assert (first.total_logprob, first.token_count) == (-12.0, 6)
    assert first == second
    with pytest.raises(ValueError):
        mock.score_loglikelihood("")
    with pytest.raises(MockMissError):
        mock.score_loglikelihood("other text")


def test_mock_scorer_hash_embeddings_are_stable():
    scorer = MockScorer(dim=8)
    a = scorer.embed("stable text", EN)
    b = scorer.embed("stable text", EN)
    assert a == b
    assert a.dim == 8
    assert sum(a.values) == 1.0  # unit basis vector
    assert scorer.qe_score("s", "h") == 0.5
    assert scorer.comet_score("s", "ref", "ref") == 1.0
    assert scorer.comet_score("s", "other", "ref") == 0.0


def test_failing_scorer_degrades():
    scorer = FailingScorer()
    with pytest.raises(DegradedScorerError):
        scorer.embed("x", EN)
    with pytest.raises(DegradedScorerError):
        scorer.qe_score("x", "y")


def test_cache_key_changes_with_any_field():
    base = GenerationRequest("p", beam_size=2).payload()
    changed = GenerationRequest("p", beam_size=4).payload()
    assert canonical_payload_digest("generate", base) != canonical_payload_digest("generate", changed)
    assert canonical_payload_digest("generate", base) == canonical_payload_digest("generate", dict(base))
    assert canonical_payload_digest("score", base) != canonical_payload_digest("generate", base)


def test_cache_deduplicates_upstream_calls(tmp_path):
    mock = MockBackend(generation={"p": "out"})
    cached = CachingBackend(mock, ResponseCache(tmp_path / "cache"))
    first = cached.generate(GenerationRequest("p"))
    second = cached.generate(GenerationRequest("p"))
    assert first == second
    assert mock.calls.get("generate") == 1
    # different decoding params miss
    cached.generate(GenerationRequest("p", beam_size=4))
    assert mock.calls.get("generate") == 2


def test_cache_persists_across_instances(tmp_path):
    cache_dir = tmp_path / "cache"
    mock_a = MockBackend(generation={"p": "out"})
    CachingBackend(mock_a, ResponseCache(cache_dir)).generate(GenerationRequest("p"))
    mock_b = MockBackend(generation={"p": "out"})
    result = CachingBackend(mock_b, ResponseCache(cache_dir)).generate(GenerationRequest("p"))
    assert result.text == "out"
    assert mock_b.calls.total == 0


def test_cache_transparency_byte_equality(tmp_path):
    table = {f"prompt {i}": f"output {i} words here" for i in range(20)}
    plain = MockBackend(generation=table)
    cached = CachingBackend(MockBackend(generation=table), ResponseCache(tmp_path / "c"))
    requests = [GenerationRequest(f"prompt {i % 20}", stop_sequences=("\n",)) for i in range(60)]
    for request in requests:
        assert cached.generate(request) == plain.generate(request)


def test_cache_corruption_recovers(tmp_path, caplog):
    cache_dir = tmp_path / "cache"
    mock = MockBackend(generation={"p": "out"})
    cached = CachingBackend(mock, ResponseCache(cache_dir))
    cached.generate(GenerationRequest("p"))
    entry = next(cache_dir.rglob("*.json"))
    entry.write_text("{not json", encoding="utf-8")
    with caplog.at_level("WARNING"):
        result = cached.generate(GenerationRequest("p"))
    assert result.text == "out"
    assert mock.calls.get("generate") == 2
    assert any("corrupt" in message for message in caplog.messages)


def test_caching_scorer(tmp_path):
    scorer = MockScorer(dim=4)
    cached = CachingScorer(scorer, ResponseCache(tmp_path / "cache"))
    first = cached.embed("text", EN)
    second = cached.embed("text", EN)
    assert first == second
    assert scorer.calls.get("embed") == 1
    assert cached.qe_score("a", "b") == cached.qe_score("a", "b")
    assert scorer.calls.get("qe") == 1
    assert cached.comet_score("a", "r", "r") == 1.0
    assert scorer.calls.get("comet") == 1


def test_with_cache_dispatch(tmp_path):
    assert isinstance(with_cache(MockBackend(), tmp_path / "a"), CachingBackend)
    assert isinstance(with_cache(MockScorer(), tmp_path / "b"), CachingScorer)
    with pytest.raises(TypeError):
        with_cache(object(), tmp_path / "c")


def test_http_backend_generation_and_scoring(stub_server):
    seen = []

    def handle(payload):
        seen.append(payload)
        if "text_to_score" in payload:
            return 200, {"logprob": -8.0, "tokens": 4}
        return 200, {"text": "Hello\nGerman: mehr", "tokens": 5}

    stub_server.route("POST", "/", handle)
    backend = HttpBackend(stub_server.url + "/", max_retries=0)
    result = backend.generate(GenerationRequest("prompt text", stop_sequences=("\n",)))
    assert result.text == "Hello"
    assert seen[0] == {
        "prompt": "prompt text",
        "beam_size": 2,
        "max_new_tokens": 256,
        "stop": ["\n"],
    }
    score = backend.score_loglikelihood("to score")
    assert (score.total_logprob, score.token_count) == (-8.0, 4)
    assert seen[1] == {"text_to_score": "to score"}


def test_http_backend_errors(stub_server):
    stub_server.route("POST", "/overflow", lambda payload: (413, {"error": "too long"}))
    overflow = HttpBackend(stub_server.url + "/overflow", max_retries=0)
    with pytest.raises(ContextOverflowError):
        overflow.score_loglikelihood("x" * 10)

    unreachable = HttpBackend("http://127.0.0.1:1/", max_retries=1, backoff_s=0.01)
    with pytest.raises(TransportError) as err:
        unreachable.generate(GenerationRequest("p"))
    assert err.value.attempts == 2

    stub_server.route("POST", "/badjson", lambda payload: (200, {"unexpected": True}))
    bad = HttpBackend(stub_server.url + "/badjson", max_retries=0)
    with pytest.raises(ProtocolError):
        bad.generate(GenerationRequest("p"))


def test_http_backend_retries_then_succeeds(stub_server):
    attempts = {"n": 0}

    def flaky(payload):
        attempts["n"] += 1
        if attempts["n"] < 2:
            return 500, {"error": "boom"}
        return 200, {"text": "ok", "tokens": 1}

    stub_server.route("POST", "/flaky", flaky)
    backend = HttpBackend(stub_server.url + "/flaky", max_retries=3, backoff_s=0.01)
    assert backend.generate(GenerationRequest("p")).text == "ok"
    assert attempts["n"] == 2


def test_http_scorer_endpoints_and_dimension_drift(stub_server):
    dim = {"value": 3}
    stub_server.route("POST", "/embed", lambda p: (200, {"vector": [1.0] * dim["value"]}))
    stub_server.route("POST", "/qe", lambda p: (200, {"score": 0.25}))
    stub_server.route("POST", "/comet", lambda p: (200, {"score": 0.75}))
    stub_server.route("GET", "/health", lambda p: (200, {"dim": 3, "models": {}}))
    scorer = HttpScorer(stub_server.url)
    assert scorer.health()["dim"] == 3
    assert scorer.embed("text", EN).values == (1.0, 1.0, 1.0)
    assert scorer.qe_score("s", "h") == 0.25
    assert scorer.comet_score("s", "h", "r") == 0.75
    dim["value"] = 4
    with pytest.raises(ProtocolError):
        scorer.embed("other", DE)


def test_http_scorer_degrades_when_unreachable():
    scorer = HttpScorer("http://127.0.0.1:1")
    with pytest.raises(DegradedScorerError):
        scorer.qe_score("a", "b")
    with pytest.raises(DegradedScorerError):
        scorer.health()


def test_mock_backend_thread_safety():
    mock = MockBackend(generation={f"p{i}": "out out" for i in range(50)}, strict=True)

    def worker(start):
        for i in range(50):
            mock.generate(GenerationRequest(f"p{i}"))

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert mock.calls.get("generate") == 200


@given(st.text(min_size=1, max_size=40), st.lists(st.text(min_size=1, max_size=5), max_size=4))
@settings(max_examples=80, deadline=None)
def test_truncation_never_contains_stop(text, stops):
    out = truncate_at_stop(text, tuple(stops))
    for stop in stops:
        assert stop not in out
    assert text.startswith(out)


def test_cache_safe_under_concurrent_access(tmp_path):
    table = {f"p{i}": f"out {i} text" for i in range(30)}
    mock = MockBackend(generation=table)
    cached = CachingBackend(mock, ResponseCache(tmp_path / "cache"))
    errors = []

    def worker():
        try:
            for i in range(30):
                result = cached.generate(GenerationRequest(f"p{i}"))
                assert result.text == f"out {i} text"
        except Exception as exc:  # propagate to the main thread
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert not errors
    # upstream saw each prompt at least once and the cache now serves all
    before = mock.calls.get("generate")
    for i in range(30):
        cached.generate(GenerationRequest(f"p{i}"))
    assert mock.calls.get("generate") == before
