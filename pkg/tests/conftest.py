import os

import numpy as np
import pytest
from hypothesis import settings

from penaltydd import experiments as ex

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_hertz():
    """Hertz problem with 4 quadratic elements on the contact part."""
    return ex.prepare(ex.ExperimentSpec(density=4))


@pytest.fixture(scope="session")
def hertz():
    """Hertz problem at the default density."""
    return ex.prepare(ex.ExperimentSpec())


@pytest.fixture(scope="session")
def hertz_reference(hertz):
    state, _ = ex.solve_tight(hertz, eps_u=1e-10)
    return state
