import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def interval_1024():
    from hlimit.complex_core import build_interval_complex
    from hlimit.hconv import prepare
    c = build_interval_complex(1024, "Dirichlet")
    return prepare(c)


@pytest.fixture(scope="session")
def two_phase_1024(interval_1024):
    from hlimit.coefficients import sequence, two_phase_cell
    return sequence("osc", geometry=interval_1024.c.geometry, cell=two_phase_cell(1.0, 0.5))


@pytest.fixture(scope="session")
def interval_256():
    from hlimit.complex_core import build_interval_complex
    from hlimit.hconv import prepare
    return prepare(build_interval_complex(256, "Dirichlet"))


@pytest.fixture(scope="session")
def two_phase_256(interval_256):
    from hlimit.coefficients import sequence, two_phase_cell
    return sequence("osc", geometry=interval_256.c.geometry, cell=two_phase_cell(1.0, 0.5),
                    indices=(1, 2, 4, 8, 16))
