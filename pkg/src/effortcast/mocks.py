"""Deterministic in-process providers for offline runs and tests.

All mocks share the fine-tune behaviour: the corpus is re-parsed line by line
(a malformed line is rejected with its line number) and the job succeeds at
once with a model id derived from the corpus digest.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path
from typing import Mapping

from .dataset import Dataset
from .errors import MalformedCorpus, ProviderRejectedCorpus, UnknownJob
from .llmclient import FineTuneJob
from .promptgen import PromptTemplate, format_hours, iter_corpus, render_prompt

GARBAGE_COMPLETION = "I am unable to estimate this project."


class MockProvider:
    name = "mock"

    def __init__(self, latency: float = 0.0):
        self.latency = latency
        self._lock = threading.Lock()
        self._jobs: dict[str, FineTuneJob] = {}
        self.calls: list[tuple[str, str | None]] = []
        self.in_flight = 0
        self.max_in_flight = 0

    def submit_finetune(self, corpus: Path, digest: str, model: str) -> FineTuneJob:
        try:
            n = sum(1 for _ in iter_corpus(corpus))
        except MalformedCorpus as exc:
            raise ProviderRejectedCorpus(f"mock provider rejected corpus: {exc}") from None
        if n == 0:
            raise ProviderRejectedCorpus("mock provider rejected corpus: no training examples")
        short = digest.split(":")[-1][:12]
        job = FineTuneJob(f"mockjob-{short}", "succeeded", digest, f"mock-ft-{short}")
        with self._lock:
            self._jobs[job.job_id] = job
        return job

    def get_job(self, job_id: str, digest: str) -> FineTuneJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"mock provider does not know job {job_id!r}")
        return job

    def complete(self, prompt: str, model: str, request_id: str | None = None) -> str:
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            self.calls.append((prompt, request_id))
        try:
            if self.latency:
                time.sleep(self.latency)
            return self.respond(prompt, request_id)
        finally:
            with self._lock:
                self.in_flight -= 1

    def respond(self, prompt: str, request_id: str | None) -> str:
        raise NotImplementedError


def _completion(hours: float) -> str:
    return f"Estimated cost is: {format_hours(hours)} hours"


class EchoOracleProvider(MockProvider):
    """Answers with the true target, looked up by request id, then by prompt text."""

    name = "mock-oracle"

    def __init__(self, by_id: Mapping[str, float] | None = None, by_prompt: Mapping[str, float] | None = None, latency: float = 0.0):
        super().__init__(latency)
        self.by_id = dict(by_id or {})
        self.by_prompt = dict(by_prompt or {})

    @classmethod
    def from_dataset(cls, ds: Dataset, template: PromptTemplate, **kw) -> "EchoOracleProvider":
        by_id = {r.id: r.target_hours for r in ds.records}
        by_prompt = {}
        for r in ds.records:
            by_prompt.setdefault(render_prompt(r, template), r.target_hours)
        return cls(by_id, by_prompt, **kw)

    @classmethod
    def from_corpus(cls, path: str | Path, **kw) -> "EchoOracleProvider":
        from .promptgen import parse_completion
        by_prompt = {}
        for rec in iter_corpus(path):
            by_prompt.setdefault(rec.prompt, parse_completion(rec.completion))
        return cls(None, by_prompt, **kw)

    def respond(self, prompt, request_id):
        if request_id is not None and request_id in self.by_id:
            return _completion(self.by_id[request_id])
        if prompt in self.by_prompt:
            return _completion(self.by_prompt[prompt])
        return GARBAGE_COMPLETION


class ConstantProvider(MockProvider):
    name = "mock-constant"

    def __init__(self, text: str = "Estimated cost is: 100.0 hours", latency: float = 0.0):
        super().__init__(latency)
        self.text = text

    def respond(self, prompt, request_id):
        return self.text


class ScriptedProvider(MockProvider):
    """Per-request scripted responses.

    ``script`` maps a request id (or prompt text) to a completion string, an
    exception instance to raise, or a list consumed one item per call.
    Unscripted requests go to ``fallback``.
    """

    name = "mock-scripted"

    def __init__(self, script: Mapping[str, object], fallback: MockProvider | str = GARBAGE_COMPLETION, latency: float = 0.0):
        super().__init__(latency)
        self.script = {k: (list(v) if isinstance(v, list) else v) for k, v in script.items()}
        self.fallback = fallback

    def respond(self, prompt, request_id):
        key = request_id if request_id in self.script else prompt if prompt in self.script else None
        if key is None:
            if isinstance(self.fallback, MockProvider):
                return self.fallback.respond(prompt, request_id)
            return self.fallback
        item = self.script[key]
        if isinstance(item, list):
            with self._lock:
                item = item.pop(0) if len(item) > 1 else item[0]
        if isinstance(item, BaseException):
            raise item
        return item

    @classmethod
    def garbage_every(cls, ids: list[str], every: int, fallback: MockProvider) -> "ScriptedProvider":
        """Oracle answers except a garbage completion for every ``every``-th id (1-based)."""
        script = {sid: GARBAGE_COMPLETION for pos, sid in enumerate(ids, start=1) if every > 0 and pos % every == 0}
        return cls(script, fallback)


PROVIDER_KINDS = ("http", "mock-oracle", "mock-constant", "mock-scripted")
