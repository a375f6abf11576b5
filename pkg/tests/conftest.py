import numpy as np
import pytest
from hypothesis import settings

from msdl.domain import AnnularDomain
from msdl.weierstrass import catenoid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def L():
    return AnnularDomain(0.5, 2.0)


@pytest.fixture(scope="session")
def K():
    return AnnularDomain(0.8, 1.25)


@pytest.fixture(scope="session")
def cat(L):
    return catenoid(L)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(n: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
