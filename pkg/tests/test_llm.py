import json
import math
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from threadlab.corpus import CodeSet, GoldAnnotations, ThreadLabel
from threadlab.llm import (
    AuthError,
    CompletionCache,
    CompletionRecord,
    ContextOverflow,
    FixtureMiss,
    HttpProvider,
    ModelConfig,
    OracleProvider,
    PricingTable,
    ProviderResult,
    RateLimited,
    ReplayProvider,
    RetryPolicy,
    TransportError,
    UnknownModelPricing,
    complete,
    estimate_cost,
    estimate_tokens,
    prompt_digest,
)
from threadlab.prompts import OutputContract, RenderedPrompt

OK_PAYLOAD = {
    "choices": [{"message": {"content": "3 Ana [respond line = 1]"}}],
    "usage": {"prompt_tokens": 12, "completion_tokens": 5},
}

FAST_RETRY = RetryPolicy(max_attempts=3, backoff_base_s=0.001, backoff_cap_s=0.002, jitter_frac=0)


def _prompt(text="hello world", kind="thread_line"):
    return RenderedPrompt(
        template_id="thread_window",
        text=text,
        expected_output=OutputContract(kind=kind, n_lines=1),
        target_index=3,
        target_speaker="Ana",
        transcript_id="t1",
    )


@contextmanager
def stub_server(responses):
    """Serve scripted (status, payload) pairs; repeats the last one when exhausted."""
    seen = []
    script = list(responses)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length)) if length else {}
            seen.append({"body": body, "auth": self.headers.get("Authorization")})
            status, payload = script.pop(0) if len(script) > 1 else script[0]
            data = (payload if isinstance(payload, str) else json.dumps(payload)).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", seen
    finally:
        server.shutdown()
        thread.join(timeout=5)


def _model(endpoint, **kw):
    kw.setdefault("auth_env", "")  # most tests run without credentials
    return ModelConfig(model_id="test-model", endpoint=endpoint, **kw)


# --- http provider ---------------------------------------------------------


def test_retries_through_throttling_then_succeeds():
    with stub_server([(429, {}), (429, {}), (200, OK_PAYLOAD)]) as (url, seen):
        provider = HttpProvider(retry=RetryPolicy(max_attempts=4, backoff_base_s=0.001,
                                                  backoff_cap_s=0.002, jitter_frac=0))
        result = provider.send(_prompt(), _model(url), "h")
    assert len(seen) == 3
    assert result.response_text == "3 Ana [respond line = 1]"
    assert result.input_tokens == 12 and result.output_tokens == 5


def test_throttling_exhausts_to_rate_limited():
    with stub_server([(429, {})]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(RateLimited):
            provider.send(_prompt(), _model(url), "h")
    assert len(seen) == FAST_RETRY.max_attempts


def test_server_errors_exhaust_to_transport_error():
    with stub_server([(503, {})]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(TransportError):
            provider.send(_prompt(), _model(url), "h")
    assert len(seen) == FAST_RETRY.max_attempts


def test_auth_failure_does_not_retry():
    with stub_server([(401, {})]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(AuthError):
            provider.send(_prompt(), _model(url), "h")
    assert len(seen) == 1


def test_context_overflow_surfaces_immediately():
    err = {"error": {"code": "context_length_exceeded", "message": "too long"}}
    with stub_server([(400, err)]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(ContextOverflow):
            provider.send(_prompt(), _model(url), "h")
    assert len(seen) == 1


def test_missing_auth_env_var_fails_before_any_request(monkeypatch):
    monkeypatch.delenv("THREADLAB_TEST_KEY", raising=False)
    with stub_server([(200, OK_PAYLOAD)]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(AuthError):
            provider.send(_prompt(), _model(url, auth_env="THREADLAB_TEST_KEY"), "h")
    assert seen == []


def test_bearer_token_read_from_environment(monkeypatch):
    monkeypatch.setenv("THREADLAB_TEST_KEY", "sk-local-test")
    with stub_server([(200, OK_PAYLOAD)]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        provider.send(_prompt(), _model(url, auth_env="THREADLAB_TEST_KEY"), "h")
    assert seen[0]["auth"] == "Bearer sk-local-test"


def test_fixed_temperature_omits_field():
    with stub_server([(200, OK_PAYLOAD)]) as (url, seen):
        provider = HttpProvider(retry=FAST_RETRY)
        provider.send(_prompt(), _model(url, temperature=0.7), "h")
        provider.send(_prompt(), _model(url, fixed_temperature=True), "h")
    assert seen[0]["body"]["temperature"] == 0.7
    assert "temperature" not in seen[1]["body"]
    assert seen[1]["body"]["model"] == "test-model"


def test_missing_usage_falls_back_to_estimates():
    payload = {"choices": [{"message": {"content": "hi"}}]}
    with stub_server([(200, payload)]) as (url, _):
        provider = HttpProvider(retry=FAST_RETRY)
        model = _model(url)
        prompt = _prompt(text="x" * 10)
        record = complete(prompt, model, provider)
    assert record.tokens_estimated
    assert record.input_tokens == estimate_tokens("x" * 10) == 3
    assert record.output_tokens == estimate_tokens("hi") == 1


def test_malformed_payload_is_transport_error():
    with stub_server([(200, {"nope": 1})]) as (url, _):
        provider = HttpProvider(retry=FAST_RETRY)
        with pytest.raises(TransportError):
            provider.send(_prompt(), _model(url), "h")


# --- caching ---------------------------------------------------------------


class CountingProvider:
    name = "counting"

    def __init__(self, text="3 Ana [respond line = 1]"):
        self.calls = 0
        self.text = text

    def send(self, prompt, model, prompt_hash):
        self.calls += 1
        return ProviderResult(self.text, 10, 4, 1)


def test_cache_hit_skips_provider(tmp_path):
    cache = CompletionCache(tmp_path / "cache.jsonl")
    provider = CountingProvider()
    model = _model("http://unused")
    first = complete(_prompt(), model, provider, cache)
    second = complete(_prompt(), model, provider, cache)
    assert provider.calls == 1
    assert first == second
    assert not first.tokens_estimated


def test_cache_survives_reload(tmp_path):
    path = tmp_path / "cache.jsonl"
    model = _model("http://unused")
    complete(_prompt(), model, CountingProvider(), CompletionCache(path))
    fresh_provider = CountingProvider()
    record = complete(_prompt(), model, fresh_provider, CompletionCache(path))
    assert fresh_provider.calls == 0
    assert record.response_text == "3 Ana [respond line = 1]"


def test_cache_last_record_wins_on_load(tmp_path):
    path = tmp_path / "cache.jsonl"
    a = CompletionRecord("hh", "old", 1, 1, 0, "x")
    b = CompletionRecord("hh", "new", 1, 1, 0, "x")
    path.write_text(json.dumps(a.as_dict()) + "\n" + json.dumps(b.as_dict()) + "\n")
    assert CompletionCache(path).get("hh").response_text == "new"


def test_prompt_digest_sensitivity():
    m1 = ModelConfig(model_id="m", temperature=0.0)
    m2 = ModelConfig(model_id="m", temperature=0.5)
    m3 = ModelConfig(model_id="other", temperature=0.0)
    h = prompt_digest(m1, "p")
    assert h == prompt_digest(ModelConfig(model_id="m"), "p")  # config identity irrelevant
    assert h != prompt_digest(m2, "p")
    assert h != prompt_digest(m3, "p")
    assert h != prompt_digest(m1, "q")


# --- replay ----------------------------------------------------------------


def test_replay_provider_round_trip(tmp_path):
    path = tmp_path / "fixture.jsonl"
    model = _model("http://unused")
    recorded = complete(_prompt(), model, CountingProvider(), CompletionCache(path))
    replay = ReplayProvider.from_path(path)
    replayed = complete(_prompt(), model, replay)
    assert replayed.response_text == recorded.response_text
    with pytest.raises(FixtureMiss):
        complete(_prompt(text="different"), model, replay)


# --- oracle ----------------------------------------------------------------


@pytest.fixture
def oracle():
    gold = GoldAnnotations(
        transcript_id="t1",
        thread={1: ThreadLabel.new_thread(), 2: ThreadLabel.link(1), 3: ThreadLabel.link(2)},
        abcde={1: CodeSet.of("E"), 2: CodeSet.of(), 3: CodeSet.of("A", "C")},
        subcat={},
    )
    return OracleProvider({"t1": gold})


def test_oracle_thread_line(oracle):
    result = oracle.send(_prompt(), _model("x"), "h")
    assert result.response_text == "3 Ana [respond line = 2]"


def test_oracle_code_line(oracle):
    result = oracle.send(_prompt(kind="code_line"), _model("x"), "h")
    assert result.response_text == "3 Ana [A, C]"


def test_oracle_blocks(oracle):
    p = RenderedPrompt(
        template_id="thread_all_at_once",
        text="t",
        expected_output=OutputContract(kind="thread_block", n_lines=3),
        target_index=None,
        target_speaker=None,
        transcript_id="t1",
        expected_entries=((1, "Ana"), (2, "Ben"), (3, "Ana")),
    )
    out = oracle.send(p, _model("x"), "h")
    assert out.response_text.splitlines() == [
        "1 Ana [respond line = -]",
        "2 Ben [respond line = 1]",
        "3 Ana [respond line = 2]",
    ]
    p_codes = RenderedPrompt(
        template_id="abcde_full_plain",
        text="t",
        expected_output=OutputContract(kind="code_block", n_lines=3),
        target_index=None,
        target_speaker=None,
        transcript_id="t1",
        expected_entries=((1, "Ana"), (2, "Ben"), (3, "Ana")),
    )
    assert oracle.send(p_codes, _model("x"), "h").response_text.splitlines() == [
        "1 Ana [E]",
        "2 Ben []",
        "3 Ana [A, C]",
    ]


# --- tokens, pricing, misc -------------------------------------------------


def test_estimate_tokens_quarters_characters():
    assert estimate_tokens("") == 1
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens("x" * 403) == math.ceil(403 / 4)


def test_pricing_table_and_cost():
    pricing = PricingTable.from_dict(
        {"test-model": {"input_per_1m": 2.5, "output_per_1m": 10.0}}
    )
    records = [
        CompletionRecord("a", "r", 1_000_000, 100_000, 0, "x"),
        CompletionRecord("b", "r", 500_000, 0, 0, "x"),
    ]
    cost = estimate_cost(records, pricing, "test-model")
    assert cost == pytest.approx(2.5 + 1.0 + 1.25)
    with pytest.raises(UnknownModelPricing):
        pricing.rate("mystery-model")


def test_retry_policy_backoff_growth_and_cap():
    import random as random_mod

    policy = RetryPolicy(max_attempts=5, backoff_base_s=1.0, backoff_cap_s=3.0, jitter_frac=0)
    rng = random_mod.Random(0)
    delays = [policy.delay(k, rng) for k in range(4)]
    assert delays == [1.0, 2.0, 3.0, 3.0]
