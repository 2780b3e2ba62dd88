import json
import math
import random
from collections import Counter
from pathlib import Path

import httpx
import pytest

from talktrace import (
    CachingScorer,
    LexicalScorer,
    RemoteScorer,
    ScoreCache,
    ScoreRequest,
    ScorerBackendConfig,
    ScorerBackendError,
    ScorerProtocolError,
    lexical_score,
)

DATA = Path(__file__).parent / "data"


def _oracle_lexical(context: str, continuation: str) -> float:
    """Independent evaluation of the smoothing formula, built from str methods."""

    def toks(s: str) -> list[str]:
        cleaned = "".join(ch if (ch.isalnum() and ch != "_") else " " for ch in s.lower())
        return cleaned.split()

    ctx, cont = toks(context), toks(continuation)
    counts = Counter(ctx)
    n = len(ctx)
    v = len(set(ctx) | set(cont))
    total = 0.0
    for t in cont:
        total += math.log((counts[t] + 1) / (n + v))
    return total


class TestLexicalScore:
    def test_matches_oracle_on_spec_fixture(self):
        context = "Teacher: the cat sat\nAssistant:"
        assert lexical_score(context, "cat") == pytest.approx(
            _oracle_lexical(context, "cat"), rel=1e-12
        )

    def test_bare_cue_context(self):
        # N=1 ("assistant"), V=|{assistant, cat}|=2 -> ln(1/3)
        assert lexical_score("Assistant:", "cat") == pytest.approx(-1.0986122886681098)

    def test_full_overlap_scores_zero(self):
        assert lexical_score("Assistant:", "assistant") == 0.0

    def test_repeated_continuation_doubles_when_vocab_unchanged(self):
        context = "Teacher: the cat sat\nAssistant:"
        assert lexical_score(context, "cat cat") == 2 * lexical_score(context, "cat")

    def test_unrelated_context_strictly_decreases_score(self):
        base = "Teacher: praise works\nAssistant:"
        grown = "Teacher: praise works the dog barks loudly\nAssistant:"
        assert lexical_score(grown, "praise") < lexical_score(base, "praise")

    def test_matching_context_beats_unrelated_context(self):
        matching = lexical_score("Teacher: praise works\nAssistant:", "praise")
        unrelated = lexical_score("Teacher: dog barks\nAssistant:", "praise")
        assert matching > unrelated
        assert matching == pytest.approx(
            _oracle_lexical("Teacher: praise works\nAssistant:", "praise"), rel=1e-12
        )
        assert unrelated == pytest.approx(
            _oracle_lexical("Teacher: dog barks\nAssistant:", "praise"), rel=1e-12
        )

    def test_empty_continuation_rejected(self):
        with pytest.raises(ValueError):
            lexical_score("Assistant:", "...")
        with pytest.raises(ValueError):
            lexical_score("Assistant:", "")

    def test_never_positive_and_case_punctuation_invariant(self):
        rng = random.Random(5)
        words = ["praise", "reward", "dog", "cat", "sits", "runs", "the", "a"]
        for _ in range(300):
            ctx_words = [rng.choice(words) for _ in range(rng.randint(1, 10))]
            cont_words = [rng.choice(words) for _ in range(rng.randint(1, 4))]
            context = "Teacher: " + " ".join(ctx_words) + "\nAssistant:"
            continuation = " ".join(cont_words)
            value = lexical_score(context, continuation)
            assert value <= 0.0
            assert value == pytest.approx(_oracle_lexical(context, continuation), rel=1e-12)
            shouted = context.upper().replace(" ", " , ")
            assert lexical_score(shouted, continuation) == pytest.approx(value, rel=1e-12)


class TestScoreCache:
    def test_round_trip_and_jsonl_shape(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ScoreCache(path)
        key = ScoreRequest("Assistant:", "cat").cache_key()
        cache.put(key, -1.5)
        record = json.loads(path.read_text().strip())
        assert set(record) == {"ck", "yk", "lp"}
        assert record["lp"] == -1.5
        reopened = ScoreCache(path)
        assert reopened.get(key) == -1.5

    def test_torn_trailing_line_is_skipped(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ScoreCache(path)
        cache.put(ScoreRequest("a", "b").cache_key(), -2.0)
        with path.open("a") as fh:
            fh.write('{"ck": "dead')
        reopened = ScoreCache(path)
        assert len(reopened) == 1


class TestCachingScorer:
    def test_transparent_to_the_backend(self):
        rng = random.Random(9)
        contexts = [f"Teacher: w{i} w{i % 3}\nAssistant:" for i in range(5)]
        requests = [(rng.choice(contexts), rng.choice(["w0", "w1 w2", "w4"])) for _ in range(60)]
        cached = CachingScorer(LexicalScorer())
        for context, continuation in requests:
            assert cached.logprob(context, continuation) == lexical_score(context, continuation)

    def test_telemetry_counts_distinct_requests(self):
        scorer = CachingScorer(LexicalScorer())
        scorer.logprob("Assistant:", "cat")
        scorer.logprob("Assistant:", "cat")
        scorer.logprob("Assistant:", "dog")
        assert scorer.stats.calls == 3
        assert scorer.stats.misses == 2
        assert scorer.stats.hits == 1

    def test_persistent_cache_survives_reopen(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        first = CachingScorer(LexicalScorer(), ScoreCache(path))
        value = first.logprob("Assistant:", "cat")
        second = CachingScorer(LexicalScorer(), ScoreCache(path))
        assert second.logprob("Assistant:", "cat") == value
        assert second.stats.hits == 1
        assert second.stats.misses == 0


def _golden(name: str) -> dict:
    return json.loads((DATA / name).read_text())


def _transport_returning(payloads: list) -> httpx.MockTransport:
    """Each call pops the next item: a dict body, an int status, or an exception."""
    queue = list(payloads)

    def handler(request: httpx.Request) -> httpx.Response:
        item = queue.pop(0)
        if isinstance(item, Exception):
            raise item
        if isinstance(item, int):
            return httpx.Response(item, json={"error": "nope"})
        return httpx.Response(200, json=item)

    return httpx.MockTransport(handler)


def _remote(payloads: list, max_retries: int = 2) -> RemoteScorer:
    config = ScorerBackendConfig(
        kind="remote",
        endpoint_url="http://scorer.test",
        model_name="scorer-test",
        max_retries=max_retries,
        backoff_s=0.0,
    )
    return RemoteScorer(config, transport=_transport_returning(payloads))


class TestRemoteScorer:
    CONTEXT = "CTX:"
    CONTINUATION = "hello world"

    def test_sums_continuation_token_logprobs(self):
        scorer = _remote([_golden("completion_ok.json")])
        assert scorer.logprob(self.CONTEXT, self.CONTINUATION) == -3.5

    def test_missing_logprobs_field(self):
        scorer = _remote([_golden("completion_missing_logprobs.json")])
        with pytest.raises(ScorerProtocolError):
            scorer.logprob(self.CONTEXT, self.CONTINUATION)

    def test_token_straddling_boundary(self):
        scorer = _remote([_golden("completion_straddle.json")])
        with pytest.raises(ScorerProtocolError, match="boundary"):
            scorer.logprob(self.CONTEXT, self.CONTINUATION)

    def test_echoed_text_mismatch(self):
        scorer = _remote([_golden("completion_echo_mismatch.json")])
        with pytest.raises(ScorerProtocolError, match="differs"):
            scorer.logprob(self.CONTEXT, self.CONTINUATION)

    def test_null_continuation_logprob(self):
        scorer = _remote([_golden("completion_null_logprob.json")])
        with pytest.raises(ScorerProtocolError, match="null"):
            scorer.logprob(self.CONTEXT, self.CONTINUATION)

    def test_timeout_then_success_records_one_retry(self):
        scorer = _remote(
            [httpx.TimeoutException("slow"), _golden("completion_ok.json")]
        )
        assert scorer.logprob(self.CONTEXT, self.CONTINUATION) == -3.5
        assert scorer.stats.retries == 1

    def test_server_errors_exhaust_retries(self):
        scorer = _remote([500, 500, 500], max_retries=2)
        with pytest.raises(ScorerBackendError) as excinfo:
            scorer.logprob(self.CONTEXT, self.CONTINUATION)
        assert excinfo.value.status == 500
        assert scorer.stats.retries == 2

    def test_client_error_fails_fast(self):
        scorer = _remote([404], max_retries=2)
        with pytest.raises(ScorerBackendError) as excinfo:
            scorer.logprob(self.CONTEXT, self.CONTINUATION)
        assert excinfo.value.status == 404
        assert scorer.stats.retries == 0

    def test_request_body_follows_wire_protocol(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json=_golden("completion_ok.json"))

        config = ScorerBackendConfig(
            kind="remote", endpoint_url="http://scorer.test", model_name="scorer-test"
        )
        scorer = RemoteScorer(config, transport=httpx.MockTransport(handler))
        scorer.logprob(self.CONTEXT, self.CONTINUATION)
        assert seen["url"] == "http://scorer.test/v1/completions"
        assert seen["body"] == {
            "model": "scorer-test",
            "prompt": "CTX:hello world",
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }


class TestScorerConfig:
    def test_remote_requires_endpoint_and_model(self):
        with pytest.raises(ValueError):
            ScorerBackendConfig(kind="remote")
        with pytest.raises(ValueError):
            ScorerBackendConfig(kind="banana")

    def test_score_request_rejects_empty_fields(self):
        with pytest.raises(ValueError):
            ScoreRequest("", "x")
        with pytest.raises(ValueError):
            ScoreRequest("x", "")
