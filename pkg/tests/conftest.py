import time

import pytest

from pdlanding import mars_scenario, solve_direct, solve_indirect, vertical_scenario
from pdlanding.model import MARS_FLOW_RATE

# the four landing scenarios of the structure claim, in order
DIRECT_SCENARIOS = {
    "unconstrained": dict(),
    "gs0": dict(glide_slope_deg=0.0),
    "gs0_p45": dict(glide_slope_deg=0.0, pointing_deg=45.0),
    "q_gs5_p45": dict(flow_rate=MARS_FLOW_RATE, glide_slope_deg=5.0, pointing_deg=45.0,
                      cost="max_final_mass"),
}


class _Cache:
    """Solve each scenario at most once per session and remember the wall time."""

    def __init__(self, solve):
        self._solve = solve
        self._store = {}

    def __call__(self, key, scenario):
        if key not in self._store:
            t0 = time.perf_counter()
            out = self._solve(scenario)
            self._store[key] = (out, time.perf_counter() - t0)
        return self._store[key]


@pytest.fixture(scope="session")
def direct_cache():
    return _Cache(solve_direct)


@pytest.fixture(scope="session")
def indirect_cache():
    return _Cache(solve_indirect)


@pytest.fixture(scope="session")
def direct_solution(direct_cache):
    """``direct_solution(name) -> ((traj, report, multipliers), seconds)``."""
    return lambda name: direct_cache(name, mars_scenario(**DIRECT_SCENARIOS[name]))


@pytest.fixture(scope="session")
def indirect_2d(indirect_cache):
    return indirect_cache("2d", mars_scenario())[0]


@pytest.fixture(scope="session")
def indirect_1d(indirect_cache):
    return indirect_cache("1d", vertical_scenario())[0]


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(number, passed, detail):
        _CRITERIA[number] = (passed, detail)
        print(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
