from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
DEMO = Path(__file__).parent.parent / "src" / "medlit" / "data" / "demo"


@pytest.fixture
def three_videos():
    d = DATA / "three_videos"
    return d / "metadata.jsonl", d / "captions", d / "annotations.tsv"


@pytest.fixture
def demo_dir():
    return DEMO


# acceptance criteria register one line each here; printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
