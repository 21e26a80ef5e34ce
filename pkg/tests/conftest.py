import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from afie import Document  # noqa: E402


@pytest.fixture
def acme_doc() -> Document:
    return Document.build("acme-2022q4", "ACME", "2022Q4", ["Revenue of ACME for 2022Q4 was $5.000 million."])


@pytest.fixture
def acme_path(tmp_path, acme_doc) -> Path:
    path = tmp_path / "acme.json"
    path.write_text(acme_doc.to_json(), encoding="utf-8")
    return path


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.failed:
        _acceptance[name] = "FAIL"
    elif report.when == "call":
        _acceptance.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(f"{_acceptance[name]}  {name.removeprefix('test_')}")
