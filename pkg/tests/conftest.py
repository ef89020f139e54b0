import mpmath as mp
import pytest

from fracit.differintegral import EvalConfig
from fracit.numerics import PrecisionContext

with mp.workdps(250):
    SQRT2 = mp.sqrt(2)

# Filled by test_acceptance.py; printed once at the end of the run.
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def cfg():
    return EvalConfig()


@pytest.fixture(scope="session")
def ctx():
    return PrecisionContext(30)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
