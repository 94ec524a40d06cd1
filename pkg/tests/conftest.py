import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_table():
    from dipkit.calibration import bootstrap_table, quantile_levels

    return bootstrap_table([10, 40, 160], quantile_levels(31, tail_points=5), repetitions=400, rng_seed=3)


ACCEPTANCE = {}


def record_acceptance(number, title, ok, detail):
    """Store one acceptance outcome for the terminal summary."""
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
