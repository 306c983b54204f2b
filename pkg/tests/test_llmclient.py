from __future__ import annotations

import json
import logging

import httpx
import pytest

from effortcast.dataset import isbsg_schema
from effortcast.errors import (
    AuthFailure,
    LLMClientError,
    NetworkFailure,
    ProviderConfigError,
    ProviderRejectedCorpus,
    RateLimited,
    UnknownJob,
)
from effortcast.llmclient import (
    Estimate,
    FineTuneJob,
    HttpProvider,
    LLMClient,
    ProviderConfig,
    SecretRedactingFilter,
    corpus_digest,
)
from effortcast.mocks import (
    GARBAGE_COMPLETION,
    ConstantProvider,
    EchoOracleProvider,
    ScriptedProvider,
)
from effortcast.promptgen import PromptTemplate, emit_corpus

BASE = "https://llm.example.test/v1"


def _cfg(**kw):
    kw.setdefault("base_url", BASE)
    kw.setdefault("base_backoff", 0.5)
    return ProviderConfig(**kw)


def _client(handler, sleeps=None, **kw):
    cfg = _cfg(**kw)
    provider = HttpProvider(cfg, transport=httpx.MockTransport(handler))
    return LLMClient(cfg, provider, sleep=(sleeps.append if sleeps is not None else lambda s: None))


@pytest.fixture
def corpus(tmp_path, blanks):
    path = tmp_path / "corpus.jsonl"
    emit_corpus(blanks.dataset, PromptTemplate.from_schema(isbsg_schema()), path)
    return path


def test_completion_request_shape(api_key):
    seen = {}

    def handler(req):
        seen["auth"] = req.headers["Authorization"]
        seen["rid"] = req.headers.get("X-Request-Id")
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"text": "Estimated cost is: 12.5 hours"}]})

    est = _client(handler).predict("describe", "ft-model", "p1")
    assert est == Estimate("p1", 12.5, "Estimated cost is: 12.5 hours", True)
    assert seen["auth"] == f"Bearer {api_key}" and seen["rid"] == "p1"
    assert seen["body"]["model"] == "ft-model" and seen["body"]["prompt"] == "describe"
    assert seen["body"]["temperature"] == 0.0


def test_missing_key_is_auth_failure(monkeypatch):
    monkeypatch.delenv("EFFORTCAST_API_KEY", raising=False)
    client = _client(lambda req: httpx.Response(200, json={}))
    with pytest.raises(AuthFailure):
        client.predict("p", "m")


@pytest.mark.parametrize("status,err", [(401, AuthFailure), (403, AuthFailure)])
def test_auth_errors_are_not_retried(api_key, status, err):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(status, json={"error": {"message": "bad key"}})

    with pytest.raises(err):
        _client(handler).predict("p", "m")
    assert len(calls) == 1


def test_backoff_doubles_then_gives_up(api_key):
    sleeps = []
    client = _client(lambda req: httpx.Response(503), sleeps, max_attempts=4, base_backoff=0.25)
    with pytest.raises(NetworkFailure):
        client.predict("p", "m")
    assert sleeps == [0.25, 0.5, 1.0]


def test_rate_limit_honours_retry_after_then_succeeds(api_key):
    sleeps, replies = [], [
        httpx.Response(429, headers={"Retry-After": "7"}),
        httpx.Response(200, json={"choices": [{"text": "Estimated cost is: 3.0 hours"}]}),
    ]
    client = _client(lambda req: replies.pop(0), sleeps)
    assert client.predict("p", "m").predicted_hours == 3.0
    assert sleeps == [7.0]


def test_transport_error_is_network_failure(api_key):
    def handler(req):
        raise httpx.ConnectError("down")

    with pytest.raises(NetworkFailure):
        _client(handler, max_attempts=2).predict("p", "m")


def test_unparsable_completion_flags_estimate(api_key):
    client = _client(lambda req: httpx.Response(200, json={"choices": [{"text": "no idea"}]}))
    est = client.predict("p", "m", "x")
    assert not est.parse_ok and est.predicted_hours is None and est.raw_completion == "no idea"


def test_finetune_submit_and_poll(api_key, corpus):
    state = {"polls": 0}

    def handler(req):
        if req.url.path.endswith("/files"):
            assert b"fine-tune" in req.content
            return httpx.Response(200, json={"id": "file-1"})
        if req.method == "POST" and req.url.path.endswith("/fine_tuning/jobs"):
            body = json.loads(req.content)
            assert body == {"model": "base-model", "training_file": "file-1"}
            return httpx.Response(200, json={"id": "ftjob-1", "status": "queued"})
        if req.url.path.endswith("/fine_tuning/jobs/ftjob-1"):
            state["polls"] += 1
            if state["polls"] < 3:
                return httpx.Response(200, json={"id": "ftjob-1", "status": "running"})
            return httpx.Response(200, json={"id": "ftjob-1", "status": "succeeded", "fine_tuned_model": "ft:abc"})
        return httpx.Response(404)

    client = _client(handler, model_name="base-model")
    job = client.submit_finetune(corpus)
    assert job.status == "pending" and job.submitted_corpus_digest == corpus_digest(corpus)
    done = client.wait_for_job(job, interval=0.0, max_polls=10)
    assert done.status == "succeeded" and done.result_model == "ft:abc" and state["polls"] == 3
    assert client.poll_job(done) is done


def test_unknown_job(api_key):
    client = _client(lambda req: httpx.Response(404, json={"error": "nope"}))
    with pytest.raises(UnknownJob):
        client.poll_job(FineTuneJob("ftjob-x", "running", "sha256:0"))


def test_provider_rejects_corpus(api_key, corpus):
    client = _client(lambda req: httpx.Response(400, json={"error": {"message": "invalid file"}}))
    with pytest.raises(ProviderRejectedCorpus, match="invalid file"):
        client.submit_finetune(corpus)


def test_job_invariant():
    with pytest.raises(LLMClientError):
        FineTuneJob("j", "succeeded", "sha256:0")
    with pytest.raises(LLMClientError):
        FineTuneJob("j", "running", "sha256:0", "model")


def test_config_validation():
    with pytest.raises(ProviderConfigError):
        _cfg(max_concurrent_requests=0)
    with pytest.raises(ProviderConfigError):
        _cfg(api_key_env_var="KEY=value")


def test_config_never_holds_the_key(api_key):
    assert api_key not in json.dumps(_cfg().to_dict())


def test_mock_finetune_rejects_malformed_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"prompt": "a", "completion": "b"}\n{"prompt": "a"}\n', encoding="utf-8")
    client = LLMClient(_cfg(), EchoOracleProvider())
    with pytest.raises(ProviderRejectedCorpus, match="2"):
        client.submit_finetune(path)


def test_mock_finetune_succeeds_with_digest_model(corpus):
    job = LLMClient(_cfg(), ConstantProvider()).submit_finetune(corpus)
    assert job.status == "succeeded"
    assert job.result_model.endswith(corpus_digest(corpus).split(":")[1][:12])


def test_batch_predict_keeps_order_and_bounds_concurrency(blanks):
    template = PromptTemplate.from_schema(isbsg_schema())
    oracle = EchoOracleProvider.from_dataset(blanks.dataset, template, latency=0.005)
    client = LLMClient(_cfg(max_concurrent_requests=3), oracle)
    items = [(r.id, f"prompt {r.id}") for r in blanks.dataset.records]
    out = client.batch_predict(items, "m")
    assert [e.source_id for e in out] == [r.id for r in blanks.dataset.records]
    assert [e.predicted_hours for e in out] == [r.target_hours for r in blanks.dataset.records]
    assert 1 < oracle.max_in_flight <= 3


def test_batch_predict_isolates_item_failures():
    provider = ScriptedProvider({"b": NetworkFailure("flaky"), "c": GARBAGE_COMPLETION}, "Estimated cost is: 5.0 hours")
    client = LLMClient(_cfg(max_attempts=2), provider, sleep=lambda s: None)
    out = client.batch_predict([("a", "x"), ("b", "x"), ("c", "x")], "m")
    assert [e.parse_ok for e in out] == [True, False, False]
    assert "flaky" in out[1].error


def test_batch_predict_aborts_on_auth_failure():
    client = LLMClient(_cfg(), ScriptedProvider({"b": AuthFailure("revoked")}, "Estimated cost is: 1.0 hours"))
    with pytest.raises(AuthFailure):
        client.batch_predict([("a", "x"), ("b", "x")], "m")


def test_batch_predict_rejects_duplicate_ids():
    with pytest.raises(ProviderConfigError):
        LLMClient(_cfg(), ConstantProvider()).batch_predict([("a", "x"), ("a", "y")], "m")


def test_scripted_list_is_consumed_per_call():
    provider = ScriptedProvider({"a": [RateLimited("slow"), "Estimated cost is: 2.0 hours"]})
    sleeps = []
    est = LLMClient(_cfg(), provider, sleep=sleeps.append).predict("x", "m", "a")
    assert est.predicted_hours == 2.0 and sleeps == [0.5]


def test_secret_filter_masks_key(api_key, caplog):
    logger = logging.getLogger("effortcast.test-secret")
    logger.addFilter(SecretRedactingFilter())
    with caplog.at_level(logging.DEBUG, logger="effortcast.test-secret"):
        logger.warning("header was %s", f"Bearer {api_key}")
    assert api_key not in caplog.text and "***" in caplog.text


def test_http_debug_log_has_no_key(api_key, caplog):
    client = _client(lambda req: httpx.Response(200, json={"choices": [{"text": f"echo {req.headers['Authorization']}"}]}))
    with caplog.at_level(logging.DEBUG, logger="effortcast"):
        client.predict("p", "m")
    assert api_key not in caplog.text
