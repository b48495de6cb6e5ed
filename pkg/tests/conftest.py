import numpy as np
import pytest

from deltabox.core import BoxGeometry, SpatialGrid, TangentDivergent, TimeGrid
from deltabox.volterra import default_steps, run

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def box():
    return BoxGeometry()


@pytest.fixture(scope="session")
def default_run(box):
    """Tan protocol, x0 = 0, default resolution, 21 snapshots up to the cap."""
    p = TangentDivergent.for_box(box)
    times = np.linspace(0, p.horizon, 21)
    grid = TimeGrid(p.horizon, default_steps(box, p.horizon, multiple_of=20))
    return p, run(box, p, grid, snapshot_times=times)


@pytest.fixture(scope="session")
def offset_run():
    geom = BoxGeometry(x0=0.3)
    p = TangentDivergent.for_box(geom)
    return geom, p, run(geom, p, snapshot_times=[p.horizon], x_grid=SpatialGrid(1.0, 401))
