import pytest

from swapcheck import commerce

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def m1():
    return commerce.build_m1()


@pytest.fixture(scope="session")
def m11():
    return commerce.build_m11()[0]


@pytest.fixture(scope="session")
def m12():
    return commerce.build_m12()[0]


@pytest.fixture(scope="session")
def m141():
    return commerce.build_m141()


@pytest.fixture(scope="session")
def m142():
    return commerce.build_m142()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
