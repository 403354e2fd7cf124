import numpy as np
import pytest

from ralp.preambles import build_pool


@pytest.fixture(scope="session")
def pool13():
    return build_pool(13, 65)


@pytest.fixture(scope="session")
def pool5():
    return build_pool(5, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(20201015)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one ``(criterion, passed, detail)`` line per acceptance check."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
