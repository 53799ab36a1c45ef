"""Shared trajectories and the acceptance summary printer."""

import numpy as np
import pytest

from lsmcf import GridSpec, InitialDataSpec, RadialBump, SolverParams, build, run
from lsmcf.initial_data import Constant

ACCEPTANCE_LINES = {}


def circle_run(n, t_end=0.06, interval=0.001, track_energy=False, eps_factor=1.0):
    grid = GridSpec(2, 1.0, n)
    spec = InitialDataSpec(RadialBump((0.0, 0.0), 0.4, 0.2))
    params = SolverParams(eps_factor * grid.spacing, t_end, snapshot_interval=interval)
    return run(build(spec, grid), params, track_energy=track_energy)


@pytest.fixture(scope="session")
def circle65():
    return circle_run(65, track_energy=True)


@pytest.fixture(scope="session")
def circle129():
    return circle_run(129, track_energy=True)


@pytest.fixture(scope="session")
def stationary65():
    grid = GridSpec(2, 1.0, 65)
    g = build(InitialDataSpec(Constant(), level_offset=0.3), grid)
    return run(g, SolverParams(grid.spacing, 0.06, snapshot_interval=0.001))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
