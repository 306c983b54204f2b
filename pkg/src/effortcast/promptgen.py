"""Render project records as prompt/completion text and write fine-tune corpora."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .dataset import MISSING, Dataset, FeatureSpec, ProjectRecord
from .errors import MalformedCorpus, MissingTarget, PromptgenError, UnparsableCompletion

DEFAULT_PREAMBLE = "What is the estimated cost of hours of a Project with the description: "
DEFAULT_SEPARATOR = ", "
COMPLETION_PREFIX = "Estimated cost is: "
DEFAULT_COMPLETION = COMPLETION_PREFIX + "{} hours"

_ESTIMATE_RE = re.compile(
    r"estimated\s+cost\s+is:\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class Clause:
    feature: str
    template: str
    joiner: str | None = None


@dataclass(frozen=True)
class PromptTemplate:
    """Preamble plus ordered clauses; each clause is emitted only for valued features.

    ``missing_text`` switches from omitting MISSING features to rendering them
    with a placeholder such as ``"unknown"``.
    """

    clauses: tuple[Clause, ...]
    preamble: str = DEFAULT_PREAMBLE
    separator: str = DEFAULT_SEPARATOR
    completion: str = DEFAULT_COMPLETION
    completion_suffix: str = ""
    missing_text: str | None = None

    def __post_init__(self):
        for c in self.clauses:
            if c.template.count("{}") != 1:
                raise PromptgenError(f"clause for {c.feature!r} needs exactly one '{{}}' slot")
        if self.completion.count("{}") != 1:
            raise PromptgenError("completion template needs exactly one '{}' slot")

    @classmethod
    def from_schema(cls, schema: Sequence[FeatureSpec], **overrides) -> "PromptTemplate":
        clauses = tuple(
            Clause(f.name, f.clause if f.clause is not None else f"{f.name} is {{}}", f.joiner)
            for f in schema
        )
        return cls(clauses=clauses, **overrides)


def format_hours(hours: float) -> str:
    # repr is the shortest string that round-trips; whole values keep ".0"
    return repr(float(hours))


def render_prompt(record: ProjectRecord, template: PromptTemplate) -> str:
    parts: list[str] = [template.preamble]
    first = True
    for clause in template.clauses:
        value = record.get(clause.feature)
        if value is MISSING:
            if template.missing_text is None:
                continue
            text = template.missing_text
        else:
            text = value.render()
        if not first:
            parts.append(template.separator if clause.joiner is None else clause.joiner)
        parts.append(clause.template.replace("{}", text, 1))
        first = False
    return "".join(parts)


def render_completion(record: ProjectRecord, template: PromptTemplate | None = None) -> str:
    if record.target_hours is None:
        raise MissingTarget(f"record {record.id!r} has no target hours")
    completion = DEFAULT_COMPLETION if template is None else template.completion
    suffix = "" if template is None else template.completion_suffix
    return completion.replace("{}", format_hours(record.target_hours), 1) + suffix


def parse_completion(text: str) -> float:
    """First real number after 'Estimated cost is:' (case-insensitive)."""
    m = _ESTIMATE_RE.search(text)
    if m is None:
        raise UnparsableCompletion(f"no estimate found in completion {text[:80]!r}")
    return float(m.group(1))


@dataclass(frozen=True)
class PromptRecord:
    prompt: str
    completion: str
    source_id: str = ""

    def to_json(self) -> str:
        return json.dumps({"prompt": self.prompt, "completion": self.completion}, ensure_ascii=False)


def build_records(ds: Dataset, template: PromptTemplate) -> list[PromptRecord]:
    out = []
    for r in ds.records:
        if r.target_hours is None:
            raise MissingTarget(f"record {r.id!r} has no target hours")
        out.append(PromptRecord(render_prompt(r, template), render_completion(r, template), r.id))
    return out


def emit_corpus(ds: Dataset, template: PromptTemplate, path: str | Path) -> int:
    """Write one ``{"prompt", "completion"}`` JSON object per line, in dataset order."""
    records = build_records(ds, template)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
    return len(records)


def iter_corpus(path: str | Path) -> Iterator[PromptRecord]:
    """Parse a JSONL corpus, raising MalformedCorpus with the 1-based line number."""
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedCorpus(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or set(obj) != {"prompt", "completion"}:
                raise MalformedCorpus(f"line {lineno}: expected exactly the keys 'prompt' and 'completion'")
            if not all(isinstance(obj[k], str) for k in obj):
                raise MalformedCorpus(f"line {lineno}: prompt and completion must be strings")
            if not obj["prompt"]:
                raise MalformedCorpus(f"line {lineno}: empty prompt")
            yield PromptRecord(obj["prompt"], obj["completion"], f"line-{lineno}")


def read_corpus(path: str | Path) -> list[PromptRecord]:
    return list(iter_corpus(path))
