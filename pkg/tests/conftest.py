import pytest

from helpers import aaa_vocab, ab_vocab

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def ab():
    return ab_vocab()


@pytest.fixture
def aaa():
    return aaa_vocab()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
