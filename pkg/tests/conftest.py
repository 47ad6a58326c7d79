import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record ``(number, name, passed, detail)`` for the end-of-run acceptance table."""

    def record(number, name, passed, detail=""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def vacuum_w():
    from wigsim import states

    return states.make_evaluator(states.vacuum())


@pytest.fixture
def quarter_meas():
    from wigsim.measurement import GaussianMeasurementSpec

    return GaussianMeasurementSpec((0.25 * np.eye(2),))
