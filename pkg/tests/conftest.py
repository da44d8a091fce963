from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from support import CAMPAIGN_PROJECT, model_of  # noqa: E402

_CRITERIA: dict[int, list[tuple[str, str, str]]] = {}


@pytest.fixture
def json_map_model():
    return model_of("JsonMapConverterTest.java")


@pytest.fixture
def bootstrap_model():
    return model_of("BootstrapEnvironmentTest.java")


@pytest.fixture
def project_copy(tmp_path: Path) -> Path:
    """A throwaway copy of the campaign fixture project."""
    dest = tmp_path / "project"
    shutil.copytree(CAMPAIGN_PROJECT, dest)
    return dest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = ""
        if report.outcome != "passed" and call.excinfo is not None:
            detail = str(call.excinfo.value).splitlines()[0][:160] if str(call.excinfo.value) else call.excinfo.typename
        _CRITERIA.setdefault(marker.args[0], []).append((item.name, report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        results = _CRITERIA[number]
        ok = all(outcome == "passed" for _, outcome, _ in results)
        failed = [f"{name}: {detail}" for name, outcome, detail in results if outcome != "passed"]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({len(results)} check(s))"
        if failed:
            line += " -- " + "; ".join(failed)
        terminalreporter.write_line(line)
