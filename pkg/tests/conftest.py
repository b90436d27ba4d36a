import os

import pytest

from bigrucnn import tensor as tn

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "bigrucnn", "data")
FIXTURE_CSV = os.path.abspath(os.path.join(DATA_DIR, "fixture.csv"))
TOY_CSV = os.path.abspath(os.path.join(DATA_DIR, "toy32.csv"))


@pytest.fixture
def fixture_csv():
    return FIXTURE_CSV


@pytest.fixture
def toy_csv():
    return TOY_CSV


@pytest.fixture
def float64():
    """Gradient checks need double precision: float32 central differences at
    eps=1e-3 carry ~1e-3 relative rounding noise."""
    with tn.default_dtype("float64"):
        yield


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
