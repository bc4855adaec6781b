import numpy as np
import pytest

from gccabss.signals import DEFAULT_SOURCE_FILTERS, SourceSpec, generate_sources


@pytest.fixture(scope="session")
def sources_1e4():
    return generate_sources(SourceSpec(DEFAULT_SOURCE_FILTERS, seed=3, length=10_000))


@pytest.fixture(scope="session")
def sources_1e5():
    return generate_sources(SourceSpec(DEFAULT_SOURCE_FILTERS, seed=4, length=100_000))


def random_spd(rng, n, cond_max=1e3):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(0.0, np.log(cond_max), n))
    return (q * ev) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
