import sys
from pathlib import Path

import pytest
from hypothesis import settings

from kgdial import benchmarks
from kgdial.corpus import load_knowledge

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "kgdial" / "fixtures"

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def store():
    return load_knowledge(FIXTURES / "knowledge_small.json")


@pytest.fixture(scope="session")
def source_store():
    return benchmarks.source_store()


@pytest.fixture(scope="session")
def source_corpus():
    return benchmarks.source_corpus()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("] ")[1].split(".")[0])):
            terminalreporter.write_line(line)
