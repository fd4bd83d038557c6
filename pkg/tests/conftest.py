import json
import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repro", derandomize=True, max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")

ORACLE_PATH = pathlib.Path(__file__).with_name("oracle_values.json")
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_PATH.read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
