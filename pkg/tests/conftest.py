from __future__ import annotations

import pytest

from effortcast.dataset import write_csv
from effortcast.synthetic import desharnais_like, planted_blanks_dataset

ISBSG_TARGET = "Normalised Work Effort"


@pytest.fixture
def blanks():
    return planted_blanks_dataset(seed=0)


@pytest.fixture
def isbsg_csv(tmp_path, blanks):
    path = tmp_path / "isbsg.csv"
    write_csv(blanks.dataset, path, ISBSG_TARGET)
    return path


@pytest.fixture
def desharnais_csv(tmp_path):
    path = tmp_path / "desharnais.csv"
    write_csv(desharnais_like(81, seed=0), path, "Effort", id_column="Project")
    return path


@pytest.fixture
def api_key(monkeypatch):
    key = "sk-test-7f3a9c1e-do-not-log"
    monkeypatch.setenv("EFFORTCAST_API_KEY", key)
    return key


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, shown in the terminal summary."""
    number = request.node.get_closest_marker("criterion").args[0]
    notes: list[str] = []
    _ACCEPTANCE[number] = f"criterion {number}: FAIL (did not finish)"
    yield notes
    failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
    status = "FAIL" if failed else "PASS"
    _ACCEPTANCE[number] = f"criterion {number}: {status}" + (f" - {'; '.join(notes)}" if notes else "")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
