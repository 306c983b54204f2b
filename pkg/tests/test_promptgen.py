from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from effortcast.dataset import MISSING, Dataset, Numeric, ProjectRecord, isbsg_schema, load_csv
from effortcast.errors import MalformedCorpus, MissingTarget, PromptgenError, UnparsableCompletion
from effortcast.promptgen import (
    Clause,
    PromptTemplate,
    emit_corpus,
    format_hours,
    parse_completion,
    read_corpus,
    render_completion,
    render_prompt,
)

GOLDEN = Path(__file__).parent / "golden"
TARGET = "Normalised Work Effort"


@pytest.fixture
def example():
    return load_csv(GOLDEN / "example.csv", isbsg_schema(), TARGET)


def test_golden_prompt_byte_for_byte(example):
    template = PromptTemplate.from_schema(isbsg_schema())
    expected = (GOLDEN / "example_prompt.txt").read_bytes()
    assert render_prompt(example.records[0], template).encode("utf-8") == expected


def test_golden_completion_byte_for_byte(example):
    expected = (GOLDEN / "example_completion.txt").read_bytes()
    assert render_completion(example.records[0]).encode("utf-8") == expected


def test_missing_features_are_omitted_or_placeheld(example):
    rec = example.records[0]
    feats = dict(rec.features)
    feats["max_team_size"] = MISSING
    holey = ProjectRecord(rec.id, feats, rec.target_hours)
    t = PromptTemplate.from_schema(isbsg_schema())
    assert "Max Team Size" not in render_prompt(holey, t)
    t2 = PromptTemplate.from_schema(isbsg_schema(), missing_text="unknown")
    assert "Max Team Size of unknown" in render_prompt(holey, t2)


def test_bad_templates_rejected():
    with pytest.raises(PromptgenError):
        PromptTemplate((Clause("x", "no slot"),))
    with pytest.raises(PromptgenError):
        PromptTemplate((), completion="no slot")


@pytest.mark.parametrize("text,value", [
    ("Estimated cost is: 1112.0 hours", 1112.0),
    ("estimated COST is:   42 hours and more", 42.0),
    ("Sure. Estimated cost is: 3.5e3 hours", 3500.0),
    ("Estimated cost is: 7 hours. Estimated cost is: 9 hours", 7.0),
])
def test_parse_completion(text, value):
    assert parse_completion(text) == value


@pytest.mark.parametrize("text", ["", "I cannot say", "Estimated cost is: many hours"])
def test_parse_completion_rejects_garbage(text):
    with pytest.raises(UnparsableCompletion):
        parse_completion(text)


@given(st.floats(min_value=1e-6, max_value=1e9, allow_nan=False, allow_infinity=False))
def test_completion_round_trips(hours):
    rec = ProjectRecord("x", {}, hours)
    assert parse_completion(render_completion(rec)) == hours
    assert format_hours(hours) == repr(float(hours))


def test_emit_and_read_corpus(tmp_path, blanks):
    path = tmp_path / "c.jsonl"
    template = PromptTemplate.from_schema(blanks.dataset.schema)
    n = emit_corpus(blanks.dataset, template, path)
    raw = path.read_bytes()
    assert n == 100 and raw.count(b"\n") == 100 and b"\r" not in raw
    for line in raw.decode().splitlines():
        assert set(json.loads(line)) == {"prompt", "completion"}
    back = read_corpus(path)
    assert [r.completion for r in back] == [render_completion(r) for r in blanks.dataset.records]


def test_target_less_record_cannot_enter_corpus(tmp_path):
    ds = Dataset(isbsg_schema(), (ProjectRecord("a", {"max_team_size": Numeric(3.0)}, None),))
    with pytest.raises(MissingTarget):
        emit_corpus(ds, PromptTemplate.from_schema(isbsg_schema()), tmp_path / "c.jsonl")


@pytest.mark.parametrize("bad", [
    '{"prompt": "p"}',
    '{"prompt": "", "completion": "c"}',
    '{"prompt": "p", "completion": "c", "extra": 1}',
    "not json",
])
def test_malformed_corpus_cites_line(tmp_path, bad):
    path = tmp_path / "c.jsonl"
    path.write_text('{"prompt": "p", "completion": "c"}\n' + bad + "\n", encoding="utf-8")
    with pytest.raises(MalformedCorpus, match="2"):
        read_corpus(path)
