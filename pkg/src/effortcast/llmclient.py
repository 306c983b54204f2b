"""Provider-agnostic client for fine-tune jobs and completion inference.

The HTTP provider speaks an OpenAI-compatible completions interface:

    POST {base_url}/files                    multipart upload, purpose=fine-tune
    POST {base_url}/fine_tuning/jobs         {"model", "training_file", "hyperparameters"}
    GET  {base_url}/fine_tuning/jobs/{id}
    POST {base_url}/completions              {"model", "prompt", "temperature", "max_tokens"}

The API key is read from the environment variable named in the config at call
time; it is never stored, serialized or logged.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import (
    AuthFailure,
    LLMClientError,
    NetworkFailure,
    ProviderConfigError,
    ProviderRejectedCorpus,
    RateLimited,
    UnknownJob,
    UnparsableCompletion,
)
from .promptgen import parse_completion

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "EFFORTCAST_API_KEY"
JOB_STATES = ("pending", "running", "succeeded", "failed")
TERMINAL_STATES = ("succeeded", "failed")

_STATUS_MAP = {
    "validating_files": "pending",
    "queued": "pending",
    "pending": "pending",
    "running": "running",
    "succeeded": "succeeded",
    "failed": "failed",
    "cancelled": "failed",
}


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    model_name: str = ""
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_concurrent_requests: int = 4
    max_attempts: int = 3
    base_backoff: float = 0.5
    max_backoff: float = 30.0
    temperature: float = 0.0
    max_tokens: int = 32
    finetune_hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_concurrent_requests < 1:
            raise ProviderConfigError("max_concurrent_requests must be >= 1")
        if self.max_attempts < 1:
            raise ProviderConfigError("max_attempts must be >= 1")
        if self.timeout <= 0 or self.base_backoff < 0:
            raise ProviderConfigError("timeout must be > 0 and base_backoff >= 0")
        if not self.api_key_env_var or "=" in self.api_key_env_var:
            raise ProviderConfigError("api_key_env_var must be an environment variable name")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env_var) or None

    def to_dict(self) -> dict:
        # only the variable name is persisted, never its value
        return asdict(self)


@dataclass(frozen=True)
class FineTuneJob:
    job_id: str
    status: str
    submitted_corpus_digest: str
    result_model: str | None = None
    message: str = ""

    def __post_init__(self):
        if self.status not in JOB_STATES:
            raise LLMClientError(f"unknown job status {self.status!r}")
        if (self.result_model is not None) != (self.status == "succeeded"):
            raise LLMClientError("result_model must be present exactly when the job succeeded")

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL_STATES

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FineTuneJob":
        return cls(d["job_id"], d["status"], d["submitted_corpus_digest"], d.get("result_model"), d.get("message", ""))


@dataclass(frozen=True)
class Estimate:
    source_id: str
    predicted_hours: float | None
    raw_completion: str
    parse_ok: bool
    error: str | None = None

    def __post_init__(self):
        if (self.predicted_hours is not None) != self.parse_ok:
            raise LLMClientError("predicted_hours must be present exactly when parse_ok")


def corpus_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def redact(text: str, secret: str | None) -> str:
    if secret:
        return text.replace(secret, "***")
    return text


class SecretRedactingFilter(logging.Filter):
    """Masks the value of the configured API-key variable in any log record."""

    def __init__(self, env_var: str = DEFAULT_API_KEY_ENV):
        super().__init__()
        self.env_var = env_var

    def filter(self, record: logging.LogRecord) -> bool:
        secret = os.environ.get(self.env_var)
        if secret:
            msg = record.getMessage()
            if secret in msg:
                record.msg = redact(msg, secret)
                record.args = ()
        return True


class HttpProvider:
    """OpenAI-compatible HTTP backend. Raises classified errors; retries live in the client."""

    def __init__(self, cfg: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self._client = httpx.Client(base_url=cfg.base_url.rstrip("/"), timeout=cfg.timeout, transport=transport)

    def close(self):
        self._client.close()

    def _headers(self, request_id: str | None = None) -> dict:
        key = self.cfg.api_key()
        if key is None:
            raise AuthFailure(f"environment variable {self.cfg.api_key_env_var} is not set")
        headers = {"Authorization": f"Bearer {key}"}
        if request_id:
            headers["X-Request-Id"] = request_id
        return headers

    def _send(self, method: str, path: str, *, request_id: str | None = None, **kwargs) -> httpx.Response:
        headers = self._headers(request_id)
        log.debug("HTTP %s %s headers=%s body=%s", method, path,
                  {k: ("Bearer ***" if k == "Authorization" else v) for k, v in headers.items()},
                  kwargs.get("json"))
        try:
            resp = self._client.request(method, path, headers=headers, **kwargs)
        except httpx.TransportError as exc:
            raise NetworkFailure(f"{method} {path}: {type(exc).__name__}") from None
        log.debug("HTTP %s %s -> %d %s", method, path, resp.status_code, redact(resp.text[:500], self.cfg.api_key()))
        if resp.status_code in (401, 403):
            raise AuthFailure(f"{method} {path}: provider returned {resp.status_code}")
        if resp.status_code == 429:
            err = RateLimited(f"{method} {path}: rate limited")
            err.retry_after = _retry_after(resp)
            raise err
        if resp.status_code >= 500:
            raise NetworkFailure(f"{method} {path}: provider returned {resp.status_code}")
        return resp

    def submit_finetune(self, corpus: Path, digest: str, model: str) -> FineTuneJob:
        resp = self._send("POST", "/files", data={"purpose": "fine-tune"},
                          files={"file": (corpus.name, corpus.read_bytes(), "application/jsonl")})
        if resp.status_code >= 400:
            raise ProviderRejectedCorpus(_provider_message(resp))
        file_id = resp.json()["id"]
        body = {"model": model, "training_file": file_id}
        if self.cfg.finetune_hyperparameters:
            body["hyperparameters"] = dict(self.cfg.finetune_hyperparameters)
        resp = self._send("POST", "/fine_tuning/jobs", json=body)
        if resp.status_code >= 400:
            raise ProviderRejectedCorpus(_provider_message(resp))
        return _job_from_payload(resp.json(), digest)

    def get_job(self, job_id: str, digest: str) -> FineTuneJob:
        resp = self._send("GET", f"/fine_tuning/jobs/{job_id}")
        if resp.status_code == 404:
            raise UnknownJob(f"provider does not know job {job_id!r}")
        if resp.status_code >= 400:
            raise LLMClientError(_provider_message(resp))
        return _job_from_payload(resp.json(), digest)

    def complete(self, prompt: str, model: str, request_id: str | None = None) -> str:
        body = {"model": model, "prompt": prompt, "temperature": self.cfg.temperature, "max_tokens": self.cfg.max_tokens}
        resp = self._send("POST", "/completions", json=body, request_id=request_id)
        if resp.status_code >= 400:
            raise LLMClientError(_provider_message(resp))
        try:
            return resp.json()["choices"][0]["text"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise LLMClientError("completion response lacks choices[0].text") from None


def _retry_after(resp: httpx.Response) -> float | None:
    try:
        return float(resp.headers.get("Retry-After", ""))
    except ValueError:
        return None


def _provider_message(resp: httpx.Response) -> str:
    try:
        payload = resp.json()
        err = payload.get("error", payload)
        msg = err.get("message") if isinstance(err, dict) else str(err)
    except ValueError:
        msg = resp.text
    return f"provider returned {resp.status_code}: {msg}"


def _job_from_payload(payload: dict, digest: str) -> FineTuneJob:
    status = _STATUS_MAP.get(payload.get("status", ""), "pending")
    model = payload.get("fine_tuned_model") if status == "succeeded" else None
    if status == "succeeded" and not model:
        raise LLMClientError(f"job {payload.get('id')!r} succeeded without a model id")
    err = payload.get("error") or {}
    return FineTuneJob(payload["id"], status, digest, model, err.get("message", "") if isinstance(err, dict) else str(err))


class LLMClient:
    """Thread-safe client: bounded retries with exponential backoff and a cap on in-flight requests.

    ``provider`` defaults to :class:`HttpProvider`; pass a mock from
    :mod:`effortcast.mocks` for offline runs. ``sleep`` is injectable so tests
    can observe backoff without waiting.
    """

    def __init__(self, cfg: ProviderConfig, provider=None, sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self.provider = provider if provider is not None else HttpProvider(cfg)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.max_concurrent_requests)

    def _call(self, what: str, fn, *args, **kwargs):
        last: LLMClientError | None = None
        for attempt in range(1, self.cfg.max_attempts + 1):
            with self._slots:
                try:
                    return fn(*args, **kwargs)
                except (NetworkFailure, RateLimited) as exc:
                    last = exc
            if attempt < self.cfg.max_attempts:
                delay = min(self.cfg.base_backoff * 2 ** (attempt - 1), self.cfg.max_backoff)
                delay = max(delay, getattr(last, "retry_after", None) or 0.0)
                log.info("%s failed (%s); attempt %d/%d, retrying in %.2fs", what, type(last).__name__,
                         attempt, self.cfg.max_attempts, delay)
                self._sleep(delay)
        log.warning("%s failed after %d attempt(s): %s", what, self.cfg.max_attempts, last)
        raise type(last)(f"{what}: gave up after {self.cfg.max_attempts} attempt(s): {last}") from last

    def submit_finetune(self, corpus: str | Path, model: str | None = None) -> FineTuneJob:
        corpus = Path(corpus)
        if not corpus.is_file():
            raise ProviderRejectedCorpus(f"corpus {corpus} does not exist")
        digest = corpus_digest(corpus)
        return self._call("submit_finetune", self.provider.submit_finetune, corpus, digest, model or self.cfg.model_name)

    def poll_job(self, job: FineTuneJob) -> FineTuneJob:
        if job.terminal:
            return job
        return self._call("poll_job", self.provider.get_job, job.job_id, job.submitted_corpus_digest)

    def wait_for_job(self, job: FineTuneJob, interval: float = 30.0, max_polls: int = 1000) -> FineTuneJob:
        for _ in range(max_polls):
            if job.terminal:
                return job
            self._sleep(interval)
            job = self.poll_job(job)
        return job

    def predict(self, prompt: str, model: str, source_id: str = "") -> Estimate:
        if not model:
            raise ProviderConfigError("predict needs a non-empty model id")
        raw = self._call("predict", self.provider.complete, prompt, model, request_id=source_id or None)
        try:
            return Estimate(source_id, parse_completion(raw), raw, True)
        except UnparsableCompletion as exc:
            log.warning("unparsable completion for %r", source_id)
            return Estimate(source_id, None, raw, False, str(exc))

    def batch_predict(self, prompts: Sequence[tuple[str, str]], model: str) -> list[Estimate]:
        """Predict every (id, prompt) pair; output order follows input order.

        Per-item provider failures become ``parse_ok=False`` estimates.
        Authentication and configuration faults abort the batch.
        """
        ids = [i for i, _ in prompts]
        if len(set(ids)) != len(ids):
            raise ProviderConfigError("batch_predict needs unique ids")
        if not model:
            raise ProviderConfigError("predict needs a non-empty model id")

        def one(item):
            sid, text = item
            try:
                return self.predict(text, model, sid)
            except (AuthFailure, ProviderConfigError):
                raise
            except LLMClientError as exc:
                return Estimate(sid, None, "", False, str(exc))

        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=self.cfg.max_concurrent_requests) as pool:
            return list(pool.map(one, prompts))


def submit_finetune(corpus: str | Path, cfg: ProviderConfig, provider=None) -> FineTuneJob:
    return LLMClient(cfg, provider).submit_finetune(corpus)


def poll_job(job: FineTuneJob, cfg: ProviderConfig, provider=None) -> FineTuneJob:
    return LLMClient(cfg, provider).poll_job(job)


def predict(prompt: str, model: str, cfg: ProviderConfig, provider=None) -> Estimate:
    return LLMClient(cfg, provider).predict(prompt, model)


def batch_predict(prompts: Sequence[tuple[str, str]], model: str, cfg: ProviderConfig, provider=None) -> list[Estimate]:
    return LLMClient(cfg, provider).batch_predict(prompts, model)
