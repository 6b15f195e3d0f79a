from __future__ import annotations

import pytest

from lincache.cli import data_dir
from lincache.scheme import load_scheme
from lincache.search import find_matches, load_search_spec

# acceptance outcomes, printed as one line each at the end of the run
CRITERIA: dict[str, tuple[bool, str]] = {}


def record(key: str, ok: bool, detail: str) -> None:
    CRITERIA[key] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int(k.split()[0].rstrip("abcd")), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")


@pytest.fixture(scope="session")
def data():
    return data_dir()


@pytest.fixture(scope="session")
def main_scheme(data):
    return load_scheme(data / "schemes" / "p06_15.scheme")


@pytest.fixture(scope="session")
def small_scheme(data):
    return load_scheme(data / "schemes" / "p05_53.scheme")


@pytest.fixture(scope="session")
def small_fixed_scheme(data):
    return load_scheme(data / "schemes" / "p05_53_fixed.scheme")


@pytest.fixture(scope="session")
def enlarged_run(data):
    spec = load_search_spec(data / "search" / "enlarged.spec")
    return spec, find_matches(spec)
