import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from labelgraph.datasets import uniform  # noqa: E402
from labelgraph.graph import BuildParams, build_index  # noqa: E402


@pytest.fixture(scope="session")
def small_data():
    return uniform(400, 8, seed=11)


@pytest.fixture(scope="session")
def small_index(small_data):
    return build_index(small_data, BuildParams(m_c=12, ef_c=32))


@pytest.fixture(scope="session")
def desk():
    """Uniform n=2000, d=16 base with 100 held-out queries."""
    base = uniform(2000, 16, seed=7)
    queries = uniform(100, 16, seed=8)
    index = build_index(base, BuildParams(m_c=16, ef_c=64))
    return base, queries, index


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
