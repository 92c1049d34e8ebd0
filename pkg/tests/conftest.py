import json
from pathlib import Path

import pytest

from fesynth.extract import SourceFile, classify_extension, scan_sources


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: pipeline acceptance criteria (one PASS/FAIL line each)"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.get_closest_marker("acceptance"):
        word = "PASS" if report.passed else "FAIL"
        item.config.pluginmanager.get_plugin("terminalreporter").write_line(
            f"ACCEPTANCE {word}: {item.name}"
        )

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"


@pytest.fixture(scope="session")
def corpus_labels():
    return json.loads((FIXTURES / "corpus_labels.json").read_text())


@pytest.fixture(scope="session")
def corpus_files():
    files = scan_sources(CORPUS)
    return {f.path: f for f in files}


def make_file(path: str, text: str) -> SourceFile:
    return SourceFile(path=path, kind=classify_extension(path), text=text)
