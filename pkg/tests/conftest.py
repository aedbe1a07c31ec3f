import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "src" / "cslxray" / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def wide_fixture():
    return DATA / "synthetic_ge_wide.csv"


@pytest.fixture
def window_fixture():
    return DATA / "synthetic_ge_4p5_48p5.csv"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS.values():
            terminalreporter.write_line(line)
