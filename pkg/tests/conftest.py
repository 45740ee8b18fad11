import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plasma_branch.lane_emden import build_lane_emden  # noqa: E402
from plasma_branch.radial import ball_geometry  # noqa: E402


@functools.lru_cache(maxsize=None)
def table_for(dim, p, n=2049):
    return build_lane_emden(dim, p, n)


@pytest.fixture(scope="session")
def tables():
    return table_for


@pytest.fixture(scope="session")
def geom2():
    return ball_geometry(2)


@pytest.fixture(scope="session")
def geom3():
    return ball_geometry(3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
